# utils/redis_connection_manager.py - Redis pools behind the persistent key table
import asyncio
import logging
import time
from typing import Any, Dict, Optional
from urllib.parse import urlsplit

import redis.asyncio as redis
from redis.asyncio import ConnectionPool, Redis

from config.config import REDIS_CONNECT_TIMEOUT_SECONDS, REDIS_MAX_CONNECTIONS, REDIS_URL

logger = logging.getLogger(__name__)


def display_url(url: str) -> str:
    """Redis URL without credentials, for logs and health output"""
    parts = urlsplit(url)
    host = parts.hostname or ""
    port = f":{parts.port}" if parts.port else ""
    return f"{parts.scheme}://{host}{port}{parts.path}"


class RedisPoolRegistry:
    """
    One connection pool per redis URL.

    Every delegator instance of a service shares the key table, so they all
    resolve to the same pool. A client is handed out only after it answered
    a PING.
    """

    def __init__(self, max_connections: int = REDIS_MAX_CONNECTIONS,
                 connect_timeout: float = REDIS_CONNECT_TIMEOUT_SECONDS):
        self.max_connections = max_connections
        self.connect_timeout = connect_timeout
        self._clients: Dict[str, Redis] = {}
        self._lock: Optional[asyncio.Lock] = None
        self.failed_connections = 0

    def _guard(self) -> asyncio.Lock:
        if self._lock is None:
            self._lock = asyncio.Lock()
        return self._lock

    async def client(self, url: str = None) -> Redis:
        url = url or REDIS_URL
        existing = self._clients.get(url)
        if existing is not None:
            return existing

        async with self._guard():
            if url in self._clients:
                return self._clients[url]
            pool = ConnectionPool.from_url(url, max_connections=self.max_connections, decode_responses=True)
            client = Redis(connection_pool=pool)
            try:
                await asyncio.wait_for(client.ping(), timeout=self.connect_timeout)
            except (asyncio.TimeoutError, redis.RedisError, OSError) as e:
                self.failed_connections += 1
                logger.error(f"❌ Redis at {display_url(url)} unreachable: {e}")
                await client.aclose()
                await pool.disconnect()
                raise redis.ConnectionError(f"redis at {display_url(url)} unreachable: {e}") from e
            self._clients[url] = client
            logger.info(f"✅ Key table pool open on {display_url(url)} (max {self.max_connections} connections)")
            return client

    async def ping(self, url: str = None) -> Dict[str, Any]:
        url = url or REDIS_URL
        started = time.perf_counter()
        try:
            client = await self.client(url)
            await client.ping()
        except redis.RedisError as e:
            return {"status": "unhealthy", "url": display_url(url), "error": str(e)}
        return {
            "status": "healthy",
            "url": display_url(url),
            "response_time_ms": round((time.perf_counter() - started) * 1000, 3),
            "failed_connections": self.failed_connections,
        }

    async def close_all(self) -> None:
        async with self._guard():
            for url, client in self._clients.items():
                try:
                    await client.aclose()
                    await client.connection_pool.disconnect()
                except redis.RedisError as e:
                    logger.warning(f"Closing redis pool {display_url(url)}: {e}")
            self._clients.clear()


_registry = RedisPoolRegistry()


async def get_redis_client(redis_url: str = None) -> Redis:
    return await _registry.client(redis_url)


async def redis_health(redis_url: str = None) -> Dict[str, Any]:
    return await _registry.ping(redis_url)


async def cleanup_redis_connections() -> None:
    """Close every pool; called on service shutdown"""
    await _registry.close_all()
    logger.info("✅ Redis connections closed")
