from pad.codec import DecryptedPad, decrypt_payload, open_pad, pack_pad, parse_metadata
from pad.crypto_suite import SUITE_AES_256_GCM, SUITE_CHACHA20_POLY1305, CryptoSuite, get_suite
from pad.metadata import PadMetadata
from pad.payload import AttributeType, DataAttribute, PlaintextPayload

__all__ = [
    "pack_pad",
    "parse_metadata",
    "decrypt_payload",
    "open_pad",
    "DecryptedPad",
    "PadMetadata",
    "PlaintextPayload",
    "DataAttribute",
    "AttributeType",
    "CryptoSuite",
    "get_suite",
    "SUITE_AES_256_GCM",
    "SUITE_CHACHA20_POLY1305",
]
