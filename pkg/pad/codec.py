# pad/codec.py
"""Data packer and unpacker for PAD containers"""
import logging
from dataclasses import dataclass

from pad.crypto_suite import get_suite
from pad.errors import PayloadEncodingError
from pad.metadata import PadMetadata, read_metadata
from pad.payload import PlaintextPayload, decode_payload, encode_payload

logger = logging.getLogger(__name__)


def pack_pad(payload: PlaintextPayload, metadata: PadMetadata, data_key: bytes) -> bytes:
    """
    Seal a payload into PAD bytes.

    metadata.payload_length is ignored and replaced by the sealed length.
    A fresh random nonce is drawn on every call.
    """
    suite = get_suite(metadata.crypto_suite)
    suite.check_key(data_key)
    if not payload.policies:
        raise PayloadEncodingError("a PAD payload must carry at least one policy")

    plaintext = encode_payload(payload)
    header = metadata.with_payload_length(suite.sealed_length(len(plaintext))).encode()
    nonce = suite.generate_nonce()
    sealed = suite.seal(data_key, nonce, plaintext, header)
    logger.debug(f"Packed PAD {metadata.data_id} ({len(sealed)} sealed bytes, suite {suite.name})")
    return header + nonce + sealed


def parse_metadata(pad_bytes: bytes) -> PadMetadata:
    """Metadata of a PAD; needs no key and exposes nothing from the payload"""
    metadata, _ = read_metadata(pad_bytes)
    return metadata


def decrypt_payload(pad_bytes: bytes, data_key: bytes) -> PlaintextPayload:
    """Authenticate and decrypt; raises IntegrityFailure on any tampering or a wrong key"""
    pad_bytes = bytes(pad_bytes)
    metadata, header_length = read_metadata(pad_bytes)
    suite = get_suite(metadata.crypto_suite)
    suite.check_key(data_key)

    nonce_end = header_length + suite.nonce_length
    nonce = pad_bytes[header_length:nonce_end]
    plaintext = suite.open(data_key, nonce, pad_bytes[nonce_end:], pad_bytes[:header_length])
    return decode_payload(plaintext)


@dataclass(frozen=True)
class DecryptedPad:
    """Metadata and authenticated plaintext of one PAD"""
    metadata: PadMetadata
    payload: PlaintextPayload

    @property
    def data_id(self):
        return self.metadata.data_id

    @property
    def custodian_id(self):
        return self.metadata.custodian_id


def open_pad(pad_bytes: bytes, data_key: bytes) -> DecryptedPad:
    return DecryptedPad(parse_metadata(pad_bytes), decrypt_payload(pad_bytes, data_key))
