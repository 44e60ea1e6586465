# delegator/key_table.py
"""Key records and the tables that hold them (in memory or in redis)"""
import asyncio
import logging
import time
import uuid
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

from redis.asyncio import Redis
from redis.exceptions import RedisError

from config.config import REDIS_KEY_PREFIX
from delegator.errors import KeyTableError
from utils.redis_connection_manager import get_redis_client, redis_health

logger = logging.getLogger(__name__)

# creates the hash with every field, or leaves an existing one untouched
_BIND_ONCE_SCRIPT = """
if redis.call("EXISTS", KEYS[1]) == 1 then
    return 0
end
redis.call("HSET", KEYS[1], unpack(ARGV))
return 1
"""


class KeyOrigin(Enum):
    LOCAL_GENERATED = "LOCAL_GENERATED"
    FETCHED = "FETCHED"
    CUSTODIAN_PROVISIONED = "CUSTODIAN_PROVISIONED"
    MIDDLEWARE_DERIVED = "MIDDLEWARE_DERIVED"


@dataclass(frozen=True)
class KeyRecord:
    data_id: uuid.UUID
    data_key: bytes = field(repr=False)
    origin: KeyOrigin
    fetched_at: float = field(default_factory=time.time)
    custodian_id: Optional[uuid.UUID] = None

    def same_binding(self, other: "KeyRecord") -> bool:
        return (self.data_id == other.data_id and self.data_key == other.data_key
                and self.custodian_id == other.custodian_id)

    def to_mapping(self) -> Dict[str, str]:
        return {
            "data_id": str(self.data_id),
            "data_key": self.data_key.hex(),
            "origin": self.origin.value,
            "fetched_at": repr(self.fetched_at),
            "custodian_id": str(self.custodian_id) if self.custodian_id else "",
        }

    @classmethod
    def from_mapping(cls, data: Dict[str, Any]) -> "KeyRecord":
        return cls(
            data_id=uuid.UUID(data["data_id"]),
            data_key=bytes.fromhex(data["data_key"]),
            origin=KeyOrigin(data["origin"]),
            fetched_at=float(data["fetched_at"]),
            custodian_id=uuid.UUID(data["custodian_id"]) if data.get("custodian_id") else None,
        )


class KeyTable(ABC):
    """data_id -> KeyRecord; a data_id is bound at most once"""
    backend = "abstract"

    @abstractmethod
    async def get(self, data_id: uuid.UUID) -> Optional[KeyRecord]:
        ...

    @abstractmethod
    async def put_if_absent(self, record: KeyRecord) -> KeyRecord:
        """Store record unless data_id is bound; returns the bound record"""

    @abstractmethod
    async def count(self) -> int:
        ...

    async def health(self) -> Dict[str, Any]:
        return {"backend": self.backend, "status": "healthy"}

    async def close(self):
        pass


class InMemoryKeyTable(KeyTable):
    backend = "memory"

    def __init__(self):
        self._records: Dict[uuid.UUID, KeyRecord] = {}
        self._write_lock = asyncio.Lock()

    async def get(self, data_id: uuid.UUID) -> Optional[KeyRecord]:
        return self._records.get(data_id)

    async def put_if_absent(self, record: KeyRecord) -> KeyRecord:
        async with self._write_lock:
            existing = self._records.get(record.data_id)
            if existing is not None:
                return existing
            self._records[record.data_id] = record
            return record

    async def count(self) -> int:
        return len(self._records)


class RedisKeyTable(KeyTable):
    """One hash per record, written whole by a script so a losing writer only ever reads complete records"""
    backend = "redis"

    def __init__(self, client: Redis = None, key_prefix: str = REDIS_KEY_PREFIX, redis_url: str = None):
        self._client = client
        self._redis_url = redis_url
        self.key_prefix = key_prefix

    async def _redis(self) -> Redis:
        if self._client is None:
            self._client = await get_redis_client(self._redis_url)
        return self._client

    def _name(self, data_id: uuid.UUID) -> str:
        return f"{self.key_prefix}{data_id}"

    async def get(self, data_id: uuid.UUID) -> Optional[KeyRecord]:
        client = await self._redis()
        data = await client.hgetall(self._name(data_id))
        if not data or "data_key" not in data or "origin" not in data:
            return None
        return KeyRecord.from_mapping(data)

    async def put_if_absent(self, record: KeyRecord) -> KeyRecord:
        client = await self._redis()
        name = self._name(record.data_id)
        fields = [item for pair in record.to_mapping().items() for item in pair]
        created = await client.eval(_BIND_ONCE_SCRIPT, 1, name, *fields)
        if created:
            logger.debug(f"Stored key record {record.data_id} in redis")
            return record
        existing = await self.get(record.data_id)
        if existing is None:
            raise KeyTableError(f"{name} exists but does not hold a complete key record")
        return existing

    async def count(self) -> int:
        client = await self._redis()
        total = 0
        async for _ in client.scan_iter(match=f"{self.key_prefix}*"):
            total += 1
        return total

    async def health(self) -> Dict[str, Any]:
        if self._client is None or self._redis_url is not None:
            return {"backend": self.backend, **(await redis_health(self._redis_url))}
        # injected client
        try:
            await self._client.ping()
        except RedisError as e:
            return {"backend": self.backend, "status": "unhealthy", "error": str(e)}
        return await super().health()


def create_key_table(backend: str, redis_url: str = None) -> KeyTable:
    if backend == "memory":
        return InMemoryKeyTable()
    if backend == "redis":
        return RedisKeyTable(redis_url=redis_url)
    raise ValueError(f"unknown key table backend {backend!r}")
