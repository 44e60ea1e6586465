# delegator/errors.py
"""Errors of the key delegator protocol, each bound to a wire ErrorCode"""
from enum import IntEnum
from typing import Dict, Type


class ErrorCode(IntEnum):
    PROTOCOL_ERROR = 1
    BAD_SIGNATURE = 2
    MEASUREMENT_REJECTED = 3
    ROLE_MISMATCH = 4
    REPLAY_DETECTED = 5
    KEY_NOT_FOUND = 6
    NOT_CUSTODIAN = 7
    DUPLICATE_CONFLICT = 8
    SESSION_EXPIRED = 9
    INTERNAL = 10


class DelegatorError(Exception):
    """Base exception for delegator protocol failures"""
    code = "DELEGATOR_ERROR"
    wire_code = ErrorCode.INTERNAL


class ProtocolError(DelegatorError):
    code = "PROTOCOL_ERROR"
    wire_code = ErrorCode.PROTOCOL_ERROR


class ChannelError(DelegatorError):
    """Transport failed: connection refused, reset or timed out"""
    code = "CHANNEL_ERROR"
    wire_code = ErrorCode.INTERNAL


class BindError(DelegatorError):
    code = "BIND_ERROR"


class AttestationFailed(DelegatorError):
    """Base for every quote verification failure"""
    code = "ATTESTATION_FAILED"
    wire_code = ErrorCode.BAD_SIGNATURE


class BadSignature(AttestationFailed):
    code = "BAD_SIGNATURE"
    wire_code = ErrorCode.BAD_SIGNATURE


class MeasurementRejected(AttestationFailed):
    code = "MEASUREMENT_REJECTED"
    wire_code = ErrorCode.MEASUREMENT_REJECTED


class RoleMismatch(AttestationFailed):
    code = "ROLE_MISMATCH"
    wire_code = ErrorCode.ROLE_MISMATCH


class ReplayDetected(AttestationFailed):
    code = "REPLAY_DETECTED"
    wire_code = ErrorCode.REPLAY_DETECTED


class KeyNotFound(DelegatorError):
    code = "KEY_NOT_FOUND"
    wire_code = ErrorCode.KEY_NOT_FOUND


class NotCustodian(DelegatorError):
    code = "NOT_CUSTODIAN"
    wire_code = ErrorCode.NOT_CUSTODIAN


class DuplicateConflict(DelegatorError):
    code = "DUPLICATE_CONFLICT"
    wire_code = ErrorCode.DUPLICATE_CONFLICT


class SessionExpired(DelegatorError):
    code = "SESSION_EXPIRED"
    wire_code = ErrorCode.SESSION_EXPIRED


class KeyTableError(DelegatorError):
    """The key table holds a record it cannot read back"""
    code = "KEY_TABLE_ERROR"


class RemoteInternalError(DelegatorError):
    code = "DELEGATOR_INTERNAL"
    wire_code = ErrorCode.INTERNAL


_BY_WIRE_CODE: Dict[ErrorCode, Type[DelegatorError]] = {
    ErrorCode.PROTOCOL_ERROR: ProtocolError,
    ErrorCode.BAD_SIGNATURE: BadSignature,
    ErrorCode.MEASUREMENT_REJECTED: MeasurementRejected,
    ErrorCode.ROLE_MISMATCH: RoleMismatch,
    ErrorCode.REPLAY_DETECTED: ReplayDetected,
    ErrorCode.KEY_NOT_FOUND: KeyNotFound,
    ErrorCode.NOT_CUSTODIAN: NotCustodian,
    ErrorCode.DUPLICATE_CONFLICT: DuplicateConflict,
    ErrorCode.SESSION_EXPIRED: SessionExpired,
    ErrorCode.INTERNAL: RemoteInternalError,
}


def error_from_wire(code: int, message: str) -> DelegatorError:
    """Exception for an ERROR frame received from the peer"""
    try:
        cls = _BY_WIRE_CODE[ErrorCode(code)]
    except ValueError:
        return ProtocolError(f"peer sent unknown error code {code}: {message}")
    return cls(message)
