# delegator/custodian.py
"""Custodian credentials: a static Ed25519 key whose public half delegators trust"""
import hashlib
import logging
import uuid
from dataclasses import dataclass, field
from typing import Dict, Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey

from delegator.attestation import raw_public_bytes
from utils.common_utils import coerce_uuid, new_uuid

logger = logging.getLogger(__name__)


def push_signing_bytes(data_id: uuid.UUID, data_key: bytes) -> bytes:
    """data_id || sha256(data_key)"""
    return data_id.bytes + hashlib.sha256(bytes(data_key)).digest()


def verify_push_signature(public_key: bytes, data_id: uuid.UUID, data_key: bytes, signature: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, push_signing_bytes(data_id, data_key))
        return True
    except (InvalidSignature, ValueError):
        return False


@dataclass
class CustodianCredential:
    custodian_id: uuid.UUID
    signing_key: Ed25519PrivateKey = field(repr=False)

    @classmethod
    def generate(cls, custodian_id=None) -> "CustodianCredential":
        return cls(coerce_uuid(custodian_id) if custodian_id else new_uuid(), Ed25519PrivateKey.generate())

    @property
    def public_key_bytes(self) -> bytes:
        return raw_public_bytes(self.signing_key.public_key())

    def sign_push(self, data_id: uuid.UUID, data_key: bytes) -> bytes:
        return self.signing_key.sign(push_signing_bytes(data_id, data_key))


class CustodianDirectory:
    """Public keys of the custodians a delegator serves"""

    def __init__(self, public_keys: Dict[uuid.UUID, bytes] = None):
        self._keys: Dict[uuid.UUID, bytes] = {}
        for custodian_id, key in (public_keys or {}).items():
            self.register(custodian_id, key)

    def register(self, custodian_id, public_key: bytes):
        self._keys[coerce_uuid(custodian_id)] = bytes(public_key)
        logger.debug(f"Registered custodian {custodian_id}")

    def public_key_of(self, custodian_id: uuid.UUID) -> Optional[bytes]:
        return self._keys.get(custodian_id)

    def __len__(self) -> int:
        return len(self._keys)
