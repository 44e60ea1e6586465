# pad/metadata.py
"""
Plaintext PAD metadata, the only part of a PAD readable without a key.

    magic "PAD1" | format_version u16 | data_id 16 | custodian_id 16 |
    crypto_suite u16 | key_delegator_uri (u16 length + UTF-8) | payload_length u64

All integers little-endian. The metadata bytes are the AEAD associated data.
"""
import logging
import uuid
from dataclasses import dataclass, replace
from typing import Any, Dict, Tuple

from config.config import PAD_FORMAT_VERSION
from pad.crypto_suite import get_suite
from pad.errors import BadMagic, MalformedMetadata, TrailingBytes, TruncatedInput, UnsupportedVersion
from utils.binary_codec import ByteReader, ByteWriter, DecodeError
from utils.common_utils import coerce_uuid, parse_host_port

logger = logging.getLogger(__name__)

PAD_MAGIC = b"PAD1"
SUPPORTED_VERSIONS = frozenset({PAD_FORMAT_VERSION})
# magic + version, the prefix checked before anything else
PREAMBLE_LENGTH = 6


@dataclass(frozen=True)
class PadMetadata:
    data_id: uuid.UUID
    custodian_id: uuid.UUID
    crypto_suite: int
    key_delegator_uri: str
    payload_length: int = 0
    format_version: int = PAD_FORMAT_VERSION

    def __post_init__(self):
        object.__setattr__(self, "data_id", coerce_uuid(self.data_id))
        object.__setattr__(self, "custodian_id", coerce_uuid(self.custodian_id))
        try:
            parse_host_port(self.key_delegator_uri)
        except ValueError as e:
            raise MalformedMetadata(f"key delegator URI: {e}") from e

    @property
    def magic(self) -> bytes:
        return PAD_MAGIC

    def with_payload_length(self, payload_length: int) -> "PadMetadata":
        return replace(self, payload_length=payload_length)

    def encode(self) -> bytes:
        return (ByteWriter()
                .raw(PAD_MAGIC)
                .u16(self.format_version)
                .uuid(self.data_id)
                .uuid(self.custodian_id)
                .u16(self.crypto_suite)
                .str16(self.key_delegator_uri)
                .u64(self.payload_length)
                .getvalue())

    def to_dict(self) -> Dict[str, Any]:
        suite = get_suite(self.crypto_suite)
        return {
            "format_version": self.format_version,
            "data_id": str(self.data_id),
            "custodian_id": str(self.custodian_id),
            "crypto_suite": f"0x{self.crypto_suite:04x}",
            "crypto_suite_name": suite.name,
            "key_delegator_uri": self.key_delegator_uri,
            "payload_length": self.payload_length,
        }


def read_metadata(pad_bytes: bytes) -> Tuple[PadMetadata, int]:
    """
    Parse the metadata and check the container length.

    Returns the metadata and the number of metadata bytes. The ciphertext is
    never touched.
    """
    pad_bytes = bytes(pad_bytes)
    if len(pad_bytes) < PREAMBLE_LENGTH:
        raise TruncatedInput(f"PAD of {len(pad_bytes)} bytes is shorter than its preamble")

    reader = ByteReader(pad_bytes)
    magic = reader.raw(4)
    if magic != PAD_MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    version = reader.u16()
    if version not in SUPPORTED_VERSIONS:
        raise UnsupportedVersion(f"unsupported PAD format version {version}")

    try:
        data_id = reader.uuid()
        custodian_id = reader.uuid()
        suite_id = reader.u16()
        uri_bytes = reader.bytes16()
        payload_length = reader.u64()
    except DecodeError as e:
        raise TruncatedInput(f"metadata is truncated: {e}") from e
    header_length = reader.offset

    suite = get_suite(suite_id)
    try:
        uri = uri_bytes.decode("utf-8")
    except UnicodeDecodeError as e:
        raise MalformedMetadata("key delegator URI is not UTF-8") from e

    if payload_length < suite.tag_length:
        raise MalformedMetadata(f"payload length {payload_length} is shorter than the {suite.tag_length}-byte tag")

    expected = header_length + suite.nonce_length + payload_length
    if len(pad_bytes) < expected:
        raise TruncatedInput(f"PAD declares {expected} bytes but only {len(pad_bytes)} are present")
    if len(pad_bytes) > expected:
        raise TrailingBytes(f"{len(pad_bytes) - expected} bytes follow the declared payload")

    metadata = PadMetadata(
        data_id=data_id,
        custodian_id=custodian_id,
        crypto_suite=suite_id,
        key_delegator_uri=uri,
        payload_length=payload_length,
        format_version=version,
    )
    return metadata, header_length
