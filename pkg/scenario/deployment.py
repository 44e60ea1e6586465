# scenario/deployment.py
"""
Everything needed to run PAD workflows on loopback: a mock attestation root,
key delegators on ephemeral ports, custodian credentials, producers and
consumer middleware wired to attest against each other.
"""
import logging
from typing import Callable, Dict, List, Optional

from config.config import (
    DELEGATOR_BUILD_ID,
    MIDDLEWARE_BUILD_ID,
    PRODUCER_BUILD_ID,
    measurement_of,
)
from delegator.attestation import AttestationIdentity, MockAttestationAuthority, MockQuoteVerifier, Role
from delegator.custodian import CustodianCredential, CustodianDirectory
from delegator.key_table import InMemoryKeyTable, KeyTable
from delegator.server import KeyDelegatorServer
from delegator.wire_protocol import WireTap
from middleware.consumer_middleware import ConsumerMiddleware
from middleware.secret_store import SecretStore
from policy.engines.registry import EngineRegistry, default_registry
from producer.producer import Producer
from utils.logging_config import PhaseRecorder

logger = logging.getLogger(__name__)

LOOPBACK = "127.0.0.1"


class LoopbackDeployment:
    def __init__(
            self,
            delegators: int = 1,
            quote_latency_ms: float = 0.0,
            accept_middleware_provisioning: bool = True,
            key_table: KeyTable = None,
    ):
        if delegators < 1:
            raise ValueError("at least one delegator is required")
        self.authority = MockAttestationAuthority(quote_latency_ms=quote_latency_ms)
        self.middleware_measurement = measurement_of(MIDDLEWARE_BUILD_ID)
        self.producer_measurement = measurement_of(PRODUCER_BUILD_ID)
        self.delegator_measurement = measurement_of(DELEGATOR_BUILD_ID)
        self.custodians = CustodianDirectory()
        self.key_table = key_table or InMemoryKeyTable()
        self.credentials: Dict[str, CustodianCredential] = {}
        self.servers: List[KeyDelegatorServer] = [
            KeyDelegatorServer(
                identity=AttestationIdentity(self.authority, self.delegator_measurement, Role.DELEGATOR),
                verifier=self.delegator_verifier(),
                key_table=self.key_table,
                custodians=self.custodians,
                accept_middleware_provisioning=accept_middleware_provisioning,
                name=f"delegator-{index}",
            )
            for index in range(delegators)
        ]
        self._stores: List[SecretStore] = []

    def delegator_verifier(self) -> MockQuoteVerifier:
        return MockQuoteVerifier(self.authority.public_key, {
            Role.CONSUMER_MIDDLEWARE: [self.middleware_measurement],
            Role.PRODUCER: [self.producer_measurement],
        })

    def client_verifier(self) -> MockQuoteVerifier:
        return MockQuoteVerifier(self.authority.public_key, {Role.DELEGATOR: [self.delegator_measurement]})

    @property
    def uris(self) -> List[str]:
        return [server.uri for server in self.servers]

    def uri_for(self, index: int) -> str:
        return self.servers[index % len(self.servers)].uri

    async def start(self) -> "LoopbackDeployment":
        for server in self.servers:
            await server.start(LOOPBACK, 0)
        return self

    async def stop(self):
        for store in self._stores:
            await store.close_sessions()
        self._stores.clear()
        for server in self.servers:
            await server.stop()

    async def __aenter__(self):
        return await self.start()

    async def __aexit__(self, exc_type, exc_val, exc_tb):
        await self.stop()

    def custodian(self, name: str, custodian_id=None) -> CustodianCredential:
        """Credential for a named custodian, registered with every delegator on first use"""
        credential = self.credentials.get(name)
        if credential is None:
            credential = CustodianCredential.generate(custodian_id)
            self.custodians.register(credential.custodian_id, credential.public_key_bytes)
            self.credentials[name] = credential
        return credential

    def secret_store(self, role: Role = Role.CONSUMER_MIDDLEWARE, recorder: PhaseRecorder = None,
                     wire_tap: WireTap = None, measurement: bytes = None) -> SecretStore:
        if measurement is None:
            measurement = self.producer_measurement if role is Role.PRODUCER else self.middleware_measurement
        store = SecretStore(AttestationIdentity(self.authority, measurement, role), self.client_verifier(),
                            wire_tap=wire_tap, recorder=recorder)
        self._stores.append(store)
        return store

    def middleware(self, registry: EngineRegistry = None, clock: Callable[[], float] = None,
                   recorder: PhaseRecorder = None, wire_tap: WireTap = None) -> ConsumerMiddleware:
        store = self.secret_store(Role.CONSUMER_MIDDLEWARE, recorder, wire_tap)
        return ConsumerMiddleware(store, registry or default_registry(clock), recorder)

    def producer(self, wire_tap: WireTap = None) -> Producer:
        return Producer(self.secret_store(Role.PRODUCER, wire_tap=wire_tap))

    def total_attestations(self) -> int:
        return sum(server.stats.attestations for server in self.servers)

    def server_for(self, uri: str) -> Optional[KeyDelegatorServer]:
        return next((server for server in self.servers if server.uri == uri), None)
