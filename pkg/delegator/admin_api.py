# delegator/admin_api.py - Read-only HTTP view of a running delegator service
import logging
import time
from typing import List

from fastapi import FastAPI

from config.config import APP_CONFIG, ENVIRONMENT
from delegator.key_table import KeyTable
from delegator.server import KeyDelegatorServer
from utils.logging_config import LogExecutionTime

logger = logging.getLogger(__name__)


def create_admin_app(instances: List[KeyDelegatorServer], key_table: KeyTable) -> FastAPI:
    started_at = time.time()
    app = FastAPI(
        title=f"{APP_CONFIG['title']} - Key Delegator",
        version=APP_CONFIG["version"],
        docs_url=None,
    )

    @app.get("/health")
    async def health():
        try:
            table = await key_table.health()
        except Exception as e:
            logger.error(f"❌ Key table health check failed: {e}")
            table = {"status": "unhealthy", "error": str(e)}
        return {
            "status": "healthy" if table.get("status") == "healthy" else "degraded",
            "environment": ENVIRONMENT,
            "instances": len(instances),
            "listening": [server.uri for server in instances if server.port is not None],
            "uptime_seconds": round(time.time() - started_at, 3),
            "key_table": table,
        }

    @app.get("/stats")
    async def stats():
        with LogExecutionTime("Admin Stats", "delegator.admin_api"):
            totals = {}
            per_instance = []
            for server in instances:
                counters = server.stats.to_dict()
                per_instance.append({"name": server.name, **counters})
                for name, value in counters.items():
                    totals[name] = totals.get(name, 0) + value
            try:
                totals["keys"] = await key_table.count()
            except Exception as e:
                logger.error(f"❌ Key table count failed: {e}")
                totals["keys"] = None
            return {"totals": totals, "instances": per_instance}

    return app
