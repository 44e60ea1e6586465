# delegator/attestation.py
"""
Mock remote attestation.

A single Ed25519 keypair stands in for the hardware quoting infrastructure. A
quote binds a party's measurement and role to an ephemeral X25519 public key,
a random nonce and an issue time. Verifiers are pluggable: anything
implementing QuoteVerifier can replace MockQuoteVerifier.
"""
import asyncio
import logging
import os
import threading
import time
import uuid
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Dict, Iterable, Mapping, Optional, Set, Tuple, Union

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from config.config import MOCK_QUOTE_LATENCY_MS, QUOTE_MAX_AGE_SECONDS
from delegator.errors import BadSignature, MeasurementRejected, ProtocolError, ReplayDetected, RoleMismatch
from utils.binary_codec import ByteReader, ByteWriter, DecodeError
from utils.common_utils import hex_preview

logger = logging.getLogger(__name__)

QUOTE_CONTEXT = b"pad-mock-quote-v1"
MEASUREMENT_LENGTH = 32
DH_PUBLIC_LENGTH = 32
NONCE_LENGTH = 16
SIGNATURE_LENGTH = 64


class Role(IntEnum):
    DELEGATOR = 1
    CONSUMER_MIDDLEWARE = 2
    PRODUCER = 3


def raw_public_bytes(public_key) -> bytes:
    return public_key.public_bytes(Encoding.Raw, PublicFormat.Raw)


@dataclass(frozen=True)
class AttestationQuote:
    measurement: bytes
    role: Role
    dh_public: bytes
    nonce: bytes
    issued_at_ms: int
    signature: bytes = b""

    def signed_bytes(self) -> bytes:
        return (ByteWriter()
                .raw(QUOTE_CONTEXT)
                .raw(self.measurement)
                .u8(int(self.role))
                .raw(self.dh_public)
                .raw(self.nonce)
                .u64(self.issued_at_ms)
                .getvalue())

    def encode(self) -> bytes:
        return (ByteWriter()
                .raw(self.measurement)
                .u8(int(self.role))
                .raw(self.dh_public)
                .raw(self.nonce)
                .u64(self.issued_at_ms)
                .raw(self.signature)
                .getvalue())

    @classmethod
    def decode_from(cls, reader: ByteReader) -> "AttestationQuote":
        try:
            measurement = reader.raw(MEASUREMENT_LENGTH)
            role_code = reader.u8()
            dh_public = reader.raw(DH_PUBLIC_LENGTH)
            nonce = reader.raw(NONCE_LENGTH)
            issued_at_ms = reader.u64()
            signature = reader.raw(SIGNATURE_LENGTH)
            role = Role(role_code)
        except (DecodeError, ValueError) as e:
            raise ProtocolError(f"malformed quote: {e}") from e
        return cls(measurement, role, dh_public, nonce, issued_at_ms, signature)

    @classmethod
    def decode(cls, data: bytes) -> "AttestationQuote":
        reader = ByteReader(data)
        quote = cls.decode_from(reader)
        if reader.remaining():
            raise ProtocolError("trailing bytes after quote")
        return quote


class MockAttestationAuthority:
    """The attestation root: signs quotes for parties it has measured"""

    def __init__(self, signing_key: Ed25519PrivateKey = None, quote_latency_ms: float = None):
        self._signing_key = signing_key or Ed25519PrivateKey.generate()
        self.quote_latency_ms = MOCK_QUOTE_LATENCY_MS if quote_latency_ms is None else quote_latency_ms
        self.quotes_issued = 0

    @property
    def public_key(self) -> Ed25519PublicKey:
        return self._signing_key.public_key()

    @property
    def public_key_bytes(self) -> bytes:
        return raw_public_bytes(self.public_key)

    def issue_quote(self, measurement: bytes, role: Role, dh_public: bytes,
                    issued_at: float = None) -> AttestationQuote:
        if len(measurement) != MEASUREMENT_LENGTH:
            raise ValueError(f"measurement must be {MEASUREMENT_LENGTH} bytes")
        issued = time.time() if issued_at is None else issued_at
        unsigned = AttestationQuote(measurement, Role(role), dh_public, os.urandom(NONCE_LENGTH), int(issued * 1000))
        self.quotes_issued += 1
        return AttestationQuote(
            unsigned.measurement, unsigned.role, unsigned.dh_public, unsigned.nonce, unsigned.issued_at_ms,
            self._signing_key.sign(unsigned.signed_bytes()),
        )


class AttestationIdentity:
    """What a measured party presents in a handshake"""

    def __init__(self, authority: MockAttestationAuthority, measurement: bytes, role: Role):
        self.authority = authority
        self.measurement = measurement
        self.role = Role(role)

    async def new_quote(self) -> Tuple[X25519PrivateKey, AttestationQuote]:
        """Fresh ephemeral key agreement key and a quote over its public half"""
        ephemeral = X25519PrivateKey.generate()
        if self.authority.quote_latency_ms > 0:
            await asyncio.sleep(self.authority.quote_latency_ms / 1000)
        quote = self.authority.issue_quote(self.measurement, self.role, raw_public_bytes(ephemeral.public_key()))
        return ephemeral, quote


class QuoteVerifier(ABC):
    @abstractmethod
    def verify(self, quote: AttestationQuote, expected_roles: Iterable[Role]) -> None:
        """Raise an AttestationFailed subclass unless the quote is acceptable"""


class MockQuoteVerifier(QuoteVerifier):
    """Checks root signature, role, measurement allow-list, freshness and nonce reuse"""

    def __init__(
            self,
            root_public_key: Union[Ed25519PublicKey, bytes],
            allow_list: Mapping[Role, Iterable[bytes]],
            max_age_seconds: float = QUOTE_MAX_AGE_SECONDS,
            clock: Callable[[], float] = None,
    ):
        if isinstance(root_public_key, (bytes, bytearray)):
            root_public_key = Ed25519PublicKey.from_public_bytes(bytes(root_public_key))
        self._root = root_public_key
        self._allow_list: Dict[Role, Set[bytes]] = {Role(r): set(m) for r, m in allow_list.items()}
        self._max_age = max_age_seconds
        self._clock = clock or time.time
        self._seen_nonces: Dict[bytes, float] = {}
        self._lock = threading.Lock()

    def allow(self, role: Role, measurement: bytes):
        with self._lock:
            self._allow_list.setdefault(Role(role), set()).add(measurement)

    def verify(self, quote: AttestationQuote, expected_roles: Iterable[Role]) -> None:
        try:
            self._root.verify(quote.signature, quote.signed_bytes())
        except InvalidSignature as e:
            raise BadSignature("quote signature does not verify under the attestation root") from e

        expected = {Role(r) for r in expected_roles}
        if quote.role not in expected:
            raise RoleMismatch(f"peer attested as {quote.role.name}, expected {sorted(r.name for r in expected)}")

        if quote.measurement not in self._allow_list.get(quote.role, ()):
            raise MeasurementRejected(
                f"measurement {hex_preview(quote.measurement)} is not allowed for {quote.role.name}")

        now = self._clock()
        issued = quote.issued_at_ms / 1000
        if abs(now - issued) > self._max_age:
            raise ReplayDetected(f"quote issued {now - issued:.1f}s ago is outside the freshness window")

        with self._lock:
            self._prune(now)
            if quote.nonce in self._seen_nonces:
                raise ReplayDetected("quote nonce was already used")
            self._seen_nonces[quote.nonce] = issued

    def _prune(self, now: float):
        stale = [n for n, issued in self._seen_nonces.items() if now - issued > self._max_age]
        for nonce in stale:
            del self._seen_nonces[nonce]


@dataclass
class AttestationSession:
    """A mutually attested channel with an agreed session key"""
    session_id: uuid.UUID
    peer_measurement: bytes
    peer_role: Role
    session_key: bytes = field(repr=False)
    established_at: float = 0.0
    last_used: float = 0.0

    def touch(self, now: float = None):
        self.last_used = time.time() if now is None else now

    def idle_for(self, now: float = None) -> float:
        return (time.time() if now is None else now) - self.last_used
