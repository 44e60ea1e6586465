# middleware/errors.py
"""Errors of the secret store and the consumer middleware"""


class SecretStoreError(Exception):
    code = "SECRET_STORE_ERROR"


class KeyConflict(SecretStoreError):
    """Same data id already cached with a different key"""
    code = "KEY_CONFLICT"


class MiddlewareError(Exception):
    """Base exception for consumer middleware operations"""
    code = "MIDDLEWARE_ERROR"


class UnknownDataset(MiddlewareError):
    code = "UNKNOWN_DATASET"


class NotChecked(MiddlewareError):
    code = "NOT_CHECKED"


class PolicyDenied(MiddlewareError):
    code = "POLICY_DENIED"


class IndexOutOfRange(MiddlewareError):
    code = "INDEX_OUT_OF_RANGE"


class EmptyDataset(MiddlewareError):
    code = "EMPTY_DATASET"


class DuplicateEntry(MiddlewareError):
    code = "DUPLICATE_ENTRY"


class NoProgramBound(MiddlewareError):
    code = "NO_PROGRAM_BOUND"


class OutputDenied(MiddlewareError):
    code = "OUTPUT_DENIED"


class DelegatorUnreachable(MiddlewareError):
    """The derived key could not be provisioned; the PAD is withheld"""
    code = "DELEGATOR_UNREACHABLE"


class ProgramMismatch(MiddlewareError):
    code = "PROGRAM_MISMATCH"


class ProgramPanic(MiddlewareError):
    code = "PROGRAM_PANIC"
