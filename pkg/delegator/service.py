# delegator/service.py
"""Delegator deployment from a JSON service config: instances, front, admin API"""
import asyncio
import json
import logging
import uuid
from pathlib import Path
from typing import Dict, List, Literal, Optional

import uvicorn
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from pydantic import BaseModel, Field, ValidationError, field_validator

from config.config import (
    ACCEPT_MIDDLEWARE_PROVISIONING,
    DELEGATOR_BUILD_ID,
    DELEGATOR_HOST,
    DELEGATOR_IDLE_TIMEOUT_SECONDS,
    DELEGATOR_PORT,
    KEY_TABLE_BACKEND,
    REDIS_URL,
    ConfigError,
    measurement_of,
)
from delegator.admin_api import create_admin_app
from delegator.attestation import AttestationIdentity, MockAttestationAuthority, MockQuoteVerifier, Role
from delegator.custodian import CustodianCredential, CustodianDirectory
from delegator.dispatcher import LoadBalancingFront
from delegator.key_table import create_key_table
from delegator.server import KeyDelegatorServer
from utils.common_utils import format_host_port
from utils.redis_connection_manager import cleanup_redis_connections

logger = logging.getLogger(__name__)


def _hex_bytes(value: str, length: int, what: str) -> bytes:
    try:
        data = bytes.fromhex(value)
    except ValueError as e:
        raise ValueError(f"{what} is not hex") from e
    if len(data) != length:
        raise ValueError(f"{what} must be {length} bytes, got {len(data)}")
    return data


class DelegatorServiceConfig(BaseModel):
    host: str = DELEGATOR_HOST
    port: int = Field(DELEGATOR_PORT, ge=0, le=65535)
    instances: int = Field(1, ge=1)
    # raw 32-byte Ed25519 seed of the mock attestation root, hex
    attestation_root_private_key: str
    delegator_measurement: Optional[str] = None
    allow_list: Dict[str, List[str]]
    custodians: Dict[uuid.UUID, str] = Field(default_factory=dict)
    idle_timeout_seconds: float = Field(DELEGATOR_IDLE_TIMEOUT_SECONDS, gt=0)
    accept_middleware_provisioning: bool = ACCEPT_MIDDLEWARE_PROVISIONING
    key_table_backend: Literal["memory", "redis"] = KEY_TABLE_BACKEND
    redis_url: str = REDIS_URL
    admin_host: str = "127.0.0.1"
    admin_port: Optional[int] = Field(None, ge=0, le=65535)

    @field_validator("attestation_root_private_key")
    @classmethod
    def _root_key(cls, value: str) -> str:
        _hex_bytes(value, 32, "attestation_root_private_key")
        return value

    @field_validator("allow_list")
    @classmethod
    def _allow_list(cls, value: Dict[str, List[str]]) -> Dict[str, List[str]]:
        if not any(value.values()):
            raise ValueError("allow_list must name at least one measurement")
        for role, measurements in value.items():
            if role.upper() not in Role.__members__:
                raise ValueError(f"unknown role {role!r} in allow_list")
            for measurement in measurements:
                _hex_bytes(measurement, 32, f"measurement for {role}")
        return value

    @field_validator("custodians")
    @classmethod
    def _custodians(cls, value: Dict[uuid.UUID, str]) -> Dict[uuid.UUID, str]:
        for custodian_id, key in value.items():
            _hex_bytes(key, 32, f"public key of custodian {custodian_id}")
        return value

    def measurement(self) -> bytes:
        if self.delegator_measurement:
            return _hex_bytes(self.delegator_measurement, 32, "delegator_measurement")
        return measurement_of(DELEGATOR_BUILD_ID)

    def role_allow_list(self) -> Dict[Role, List[bytes]]:
        return {Role[role.upper()]: [bytes.fromhex(m) for m in ms] for role, ms in self.allow_list.items()}


def load_delegator_config(path) -> DelegatorServiceConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigError(f"delegator config not found: {path}") from e
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read delegator config {path}: {e}") from e
    try:
        return DelegatorServiceConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid delegator config {path}: {e}") from e


class DelegatorService:
    """One or more delegator instances sharing a key table"""

    def __init__(self, config: DelegatorServiceConfig):
        self.config = config
        root = Ed25519PrivateKey.from_private_bytes(bytes.fromhex(config.attestation_root_private_key))
        self.authority = MockAttestationAuthority(root)
        identity = AttestationIdentity(self.authority, config.measurement(), Role.DELEGATOR)
        verifier = MockQuoteVerifier(self.authority.public_key, config.role_allow_list())
        self.key_table = create_key_table(config.key_table_backend, config.redis_url)
        custodians = CustodianDirectory({cid: bytes.fromhex(key) for cid, key in config.custodians.items()})
        self.instances: List[KeyDelegatorServer] = [
            KeyDelegatorServer(
                identity=identity,
                verifier=verifier,
                key_table=self.key_table,
                custodians=custodians,
                idle_timeout=config.idle_timeout_seconds,
                accept_middleware_provisioning=config.accept_middleware_provisioning,
                name=f"delegator-{index}",
            )
            for index in range(config.instances)
        ]
        self.front = LoadBalancingFront(self.instances) if config.instances > 1 else None
        self._admin_server: Optional[uvicorn.Server] = None
        self._admin_task: Optional[asyncio.Task] = None
        self.uri: Optional[str] = None

    async def start(self) -> str:
        if self.front is not None:
            host, port = await self.front.start(self.config.host, self.config.port)
        else:
            host, port = await self.instances[0].start(self.config.host, self.config.port)
        self.uri = format_host_port(host, port)

        if self.config.admin_port is not None:
            app = create_admin_app(self.instances, self.key_table)
            self._admin_server = uvicorn.Server(uvicorn.Config(
                app, host=self.config.admin_host, port=self.config.admin_port, log_level="warning"))
            self._admin_task = asyncio.create_task(self._admin_server.serve())
            logger.info(f"✅ Admin API on {self.config.admin_host}:{self.config.admin_port}")
        return self.uri

    async def stop(self):
        logger.info("🛑 Shutting down key delegator service...")
        if self._admin_server is not None:
            self._admin_server.should_exit = True
            await self._admin_task
            self._admin_server = None
        if self.front is not None:
            await self.front.stop()
        for server in self.instances:
            await server.stop()
        if self.config.key_table_backend == "redis":
            await cleanup_redis_connections()
        logger.info("✅ Shutdown complete")

    async def run_until(self, stop_event: asyncio.Event):
        await self.start()
        try:
            await stop_event.wait()
        finally:
            await self.stop()


class CustodianCredentialFile(BaseModel):
    custodian_id: uuid.UUID
    # raw 32-byte Ed25519 seed, hex
    signing_key: str

    @field_validator("signing_key")
    @classmethod
    def _signing_key(cls, value: str) -> str:
        _hex_bytes(value, 32, "signing_key")
        return value


def load_custodian_credential(path) -> CustodianCredential:
    """Signing credential of one custodian, the private half of a `custodians` entry"""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        description = CustodianCredentialFile.model_validate(data)
    except FileNotFoundError as e:
        raise ConfigError(f"custodian credential not found: {path}") from e
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read custodian credential {path}: {e}") from e
    except ValidationError as e:
        raise ConfigError(f"invalid custodian credential {path}: {e}") from e
    seed = bytes.fromhex(description.signing_key)
    return CustodianCredential(description.custodian_id, Ed25519PrivateKey.from_private_bytes(seed))
