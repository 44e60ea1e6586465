# pad/errors.py
"""Errors raised while packing, parsing and decrypting PADs"""


class PadError(Exception):
    """Base exception for PAD container operations"""
    code = "PAD_ERROR"


class BadMagic(PadError):
    code = "BAD_MAGIC"


class UnsupportedVersion(PadError):
    code = "UNSUPPORTED_VERSION"


class TruncatedInput(PadError):
    code = "TRUNCATED_INPUT"


class TrailingBytes(PadError):
    code = "TRAILING_BYTES"


class MalformedMetadata(PadError):
    code = "MALFORMED_METADATA"


class UnknownSuite(PadError):
    code = "UNKNOWN_SUITE"


class KeyLengthMismatch(PadError):
    code = "KEY_LENGTH_MISMATCH"


class IntegrityFailure(PadError):
    """AEAD tag did not verify: tampered PAD or wrong key"""
    code = "INTEGRITY_FAILURE"


class MalformedPayload(PadError):
    """Tag verified but the plaintext does not decode (codec bug)"""
    code = "MALFORMED_PAYLOAD"


class PayloadEncodingError(PadError):
    """Payload cannot be encoded (for example it carries no policy)"""
    code = "PAYLOAD_ENCODING_ERROR"
