# pad/crypto_suite.py
"""
Cryptographic interface for PADs.

Each suite is an AEAD identified by a 16-bit id carried in the PAD metadata.
New algorithms are added by registering another CryptoSuite.
"""
import logging
import os
import threading
from dataclasses import dataclass
from typing import Callable, Dict, List

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM, ChaCha20Poly1305

from pad.errors import IntegrityFailure, KeyLengthMismatch, UnknownSuite

logger = logging.getLogger(__name__)

SUITE_AES_256_GCM = 0x0001
SUITE_CHACHA20_POLY1305 = 0x0002


@dataclass(frozen=True)
class CryptoSuite:
    """An AEAD algorithm usable for PAD payloads and delegator sessions"""
    suite_id: int
    name: str
    key_length: int
    nonce_length: int
    tag_length: int
    aead_factory: Callable[[bytes], object]

    def check_key(self, key: bytes):
        if len(key) != self.key_length:
            raise KeyLengthMismatch(
                f"suite {self.name} needs a {self.key_length}-byte key, got {len(key)} bytes")

    def generate_key(self) -> bytes:
        return os.urandom(self.key_length)

    def generate_nonce(self) -> bytes:
        return os.urandom(self.nonce_length)

    def seal(self, key: bytes, nonce: bytes, plaintext: bytes, associated_data: bytes) -> bytes:
        """Encrypt and authenticate; returns ciphertext followed by the tag"""
        self.check_key(key)
        return self.aead_factory(bytes(key)).encrypt(nonce, plaintext, associated_data)

    def open(self, key: bytes, nonce: bytes, sealed: bytes, associated_data: bytes) -> bytes:
        """Verify and decrypt; any mismatch raises IntegrityFailure"""
        self.check_key(key)
        try:
            return self.aead_factory(bytes(key)).decrypt(nonce, sealed, associated_data)
        except InvalidTag as e:
            raise IntegrityFailure("authentication tag does not verify") from e

    def sealed_length(self, plaintext_length: int) -> int:
        return plaintext_length + self.tag_length


_suites: Dict[int, CryptoSuite] = {}
_suites_lock = threading.Lock()


def register_suite(suite: CryptoSuite):
    with _suites_lock:
        existing = _suites.get(suite.suite_id)
        if existing is not None and existing != suite:
            raise ValueError(f"suite id 0x{suite.suite_id:04x} already registered as {existing.name}")
        _suites[suite.suite_id] = suite
    logger.debug(f"Registered crypto suite 0x{suite.suite_id:04x} ({suite.name})")


def get_suite(suite_id: int) -> CryptoSuite:
    suite = _suites.get(suite_id)
    if suite is None:
        raise UnknownSuite(f"unknown crypto suite 0x{suite_id:04x}")
    return suite


def available_suites() -> List[CryptoSuite]:
    return sorted(_suites.values(), key=lambda s: s.suite_id)


register_suite(CryptoSuite(
    suite_id=SUITE_AES_256_GCM,
    name="AES-256-GCM",
    key_length=32,
    nonce_length=12,
    tag_length=16,
    aead_factory=AESGCM,
))

register_suite(CryptoSuite(
    suite_id=SUITE_CHACHA20_POLY1305,
    name="ChaCha20-Poly1305",
    key_length=32,
    nonce_length=12,
    tag_length=16,
    aead_factory=ChaCha20Poly1305,
))
