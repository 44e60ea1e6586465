# middleware/secret_store.py
"""
Secret management: data_id -> data key.

Misses are resolved by fetching from the PAD's key delegator over an attested
session. One session is kept per delegator for the lifetime of the store, so
the attestation cost is paid once per delegator and every later key costs a
fetch only.
"""
import asyncio
import logging
import threading
import time
import uuid
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Optional

from config.config import HANDSHAKE_TIMEOUT_SECONDS
from delegator.attestation import AttestationIdentity, QuoteVerifier
from delegator.client import DelegatorClient
from delegator.custodian import CustodianCredential
from delegator.errors import ChannelError, SessionExpired
from delegator.key_table import KeyOrigin, KeyRecord
from delegator.wire_protocol import WireTap
from middleware.errors import KeyConflict, SecretStoreError
from middleware.phases import LOAD_ATTESTATION, LOAD_FETCH_KEY
from utils.common_utils import coerce_uuid
from utils.logging_config import LogExecutionTime, PhaseRecorder

logger = logging.getLogger(__name__)


@dataclass
class SecretStoreStats:
    local_hits: int = 0
    attestations: int = 0
    fetches: int = 0
    pushes: int = 0
    reconnects: int = 0


class SecretStore:
    def __init__(
            self,
            identity: AttestationIdentity,
            verifier: QuoteVerifier,
            timeout: float = HANDSHAKE_TIMEOUT_SECONDS,
            wire_tap: WireTap = None,
            recorder: PhaseRecorder = None,
    ):
        self.identity = identity
        self.verifier = verifier
        self.timeout = timeout
        self.wire_tap = wire_tap
        self.recorder = recorder
        self.stats = SecretStoreStats()
        self.attestations_by_delegator: Counter = Counter()
        self._records: Dict[uuid.UUID, KeyRecord] = {}
        self._records_lock = threading.Lock()
        self._clients: Dict[str, DelegatorClient] = {}
        self._connect_locks: Dict[str, asyncio.Lock] = {}
        self._inflight: Dict[uuid.UUID, asyncio.Task] = {}

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, data_id) -> bool:
        return coerce_uuid(data_id) in self._records

    def record_of(self, data_id) -> Optional[KeyRecord]:
        return self._records.get(coerce_uuid(data_id))

    def _store(self, record: KeyRecord) -> KeyRecord:
        with self._records_lock:
            existing = self._records.get(record.data_id)
            if existing is None:
                self._records[record.data_id] = record
                return record
        if existing.data_key != record.data_key:
            raise KeyConflict(f"{record.data_id} is already cached with a different key")
        return existing

    def put_local(self, data_id, data_key: bytes, custodian_id=None):
        """Cache a key the caller already holds; later gets never touch the network"""
        data_id = coerce_uuid(data_id)
        self._store(KeyRecord(
            data_id, bytes(data_key), KeyOrigin.LOCAL_GENERATED, time.time(),
            coerce_uuid(custodian_id) if custodian_id else None,
        ))

    async def get(self, data_id, delegator_uri: str) -> bytes:
        data_id = coerce_uuid(data_id)
        started = time.perf_counter()
        record = self._records.get(data_id)
        if record is not None:
            # a local hit is the warm form of the fetch-key phase
            if self.recorder is not None:
                self.recorder.record(LOAD_FETCH_KEY, (time.perf_counter() - started) * 1000)
            self.stats.local_hits += 1
            return record.data_key

        # concurrent gets for the same missing id share one fetch
        task = self._inflight.get(data_id)
        if task is None:
            task = asyncio.ensure_future(self._fetch(data_id, delegator_uri))
            self._inflight[data_id] = task
            task.add_done_callback(lambda _: self._inflight.pop(data_id, None))
        record = await asyncio.shield(task)
        return record.data_key

    async def _fetch(self, data_id: uuid.UUID, delegator_uri: str) -> KeyRecord:
        async def fetch():
            client = await self._session_with(delegator_uri)
            with LogExecutionTime(LOAD_FETCH_KEY, __name__, self.recorder):
                return await client.fetch_key(data_id)

        custodian_id, data_key = await self._with_reconnect(delegator_uri, fetch)
        self.stats.fetches += 1
        logger.debug(f"Fetched key for {data_id} from {delegator_uri}")
        return self._store(KeyRecord(data_id, data_key, KeyOrigin.FETCHED, time.time(), custodian_id))

    async def _session_with(self, delegator_uri: str) -> DelegatorClient:
        lock = self._connect_locks.setdefault(delegator_uri, asyncio.Lock())
        async with lock:
            client = self._clients.get(delegator_uri)
            if client is not None and client.connected:
                return client
            client = DelegatorClient(delegator_uri, self.identity, self.verifier, self.timeout, self.wire_tap)
            with LogExecutionTime(LOAD_ATTESTATION, __name__, self.recorder):
                await client.connect()
            self._clients[delegator_uri] = client
            self.stats.attestations += 1
            self.attestations_by_delegator[delegator_uri] += 1
            logger.info(f"✅ Attested session with key delegator {delegator_uri}")
            return client

    async def _with_reconnect(self, delegator_uri: str, request):
        """Run request on the delegator session, re-attesting once if the session was lost"""
        try:
            return await request()
        except (SessionExpired, ChannelError) as e:
            client = self._clients.get(delegator_uri)
            if client is not None and client.connected:
                raise
            logger.info(f"Session with {delegator_uri} lost ({e.code}), attesting again")
            self.stats.reconnects += 1
            return await request()

    async def push_to_delegator(
            self,
            data_id,
            data_key: bytes,
            credential: Optional[CustodianCredential],
            delegator_uri: str,
            custodian_id=None,
    ):
        """
        Provision a key at a delegator.

        With a credential the push is signed for credential.custodian_id.
        Without one the push is unsigned, which a delegator accepts only from
        attested consumer middleware provisioning a derived PAD.
        """
        data_id = coerce_uuid(data_id)
        if credential is not None:
            custodian_id = credential.custodian_id
            signature = credential.sign_push(data_id, data_key)
        elif custodian_id is None:
            raise SecretStoreError("an unsigned push must name the custodian")
        else:
            custodian_id = coerce_uuid(custodian_id)
            signature = b""

        async def push():
            client = await self._session_with(delegator_uri)
            await client.push_key(data_id, custodian_id, bytes(data_key), signature)

        await self._with_reconnect(delegator_uri, push)
        self.stats.pushes += 1
        logger.info(f"✅ Provisioned key for {data_id} at {delegator_uri}")

    async def close_sessions(self):
        clients, self._clients = list(self._clients.values()), {}
        for client in clients:
            await client.close()
        if clients:
            logger.debug(f"Closed {len(clients)} delegator sessions")
