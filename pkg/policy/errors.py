# policy/errors.py


class PolicyError(Exception):
    """Base exception for policy handling"""
    code = "POLICY_ERROR"


class PolicyValidationError(PolicyError):
    """A policy or rule violates its structural invariants"""
    code = "POLICY_INVALID"


class PolicyDecodeError(PolicyError):
    """Binary policy bytes are malformed or not in canonical form"""
    code = "POLICY_DECODE_ERROR"


class DuplicateEngine(PolicyError):
    code = "DUPLICATE_ENGINE"
