# policy/model.py
"""
Policy and constraint-rule structures shared by every policy engine.

A Policy is written in one policy language (policy_lang_id) and carries three
constraint sections. Rules are normalized into canonical order on
construction, so structural equality and canonical-encoding equality agree.

Canonical binary form (little-endian):
    policy_lang_id (16) |
    3 x [ rule_count u16 | rule_count x ( rule_type u16 | param_len u32 | params ) ]
in section order input, program, output; rules sorted by (rule_type, params).
"""
import hashlib
import logging
import uuid
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from fractions import Fraction
from typing import Any, ClassVar, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from policy.errors import PolicyDecodeError, PolicyValidationError
from utils.binary_codec import ByteReader, ByteWriter, DecodeError
from utils.common_utils import coerce_uuid

logger = logging.getLogger(__name__)

# Published engine ids of the two compiled-in policy languages
TRAINING_POLICY_LANG_ID = uuid.UUID("6f1c2a5e-0b7d-4c39-9e2a-5d8f3b1a7c40")
MODEL_POLICY_LANG_ID = uuid.UUID("a3d9e4b2-71c8-4f05-8b6e-2c47d1f09e85")

POLICY_LANG_ALIASES = {
    "training": TRAINING_POLICY_LANG_ID,
    "model": MODEL_POLICY_LANG_ID,
}

HASH_LENGTH = 32
# widths of the canonical encoding
U32_MAX = 0xFFFF_FFFF
U64_MAX = 0xFFFF_FFFF_FFFF_FFFF


class RuleType(IntEnum):
    SHARE_CAP = 1
    PROGRAM_HASH = 2
    CUSTODIAN = 3
    AUTH_USER = 4
    RATE_LIMIT = 5
    SAME_POLICY = 6


class Section(Enum):
    INPUT = "input_constraints"
    PROGRAM = "program_constraints"
    OUTPUT = "output_constraints"


RULE_SECTIONS = {
    RuleType.SHARE_CAP: Section.INPUT,
    RuleType.AUTH_USER: Section.INPUT,
    RuleType.RATE_LIMIT: Section.INPUT,
    RuleType.PROGRAM_HASH: Section.PROGRAM,
    RuleType.CUSTODIAN: Section.OUTPUT,
    RuleType.SAME_POLICY: Section.OUTPUT,
}


class ProgramKind(Enum):
    TRAINING = "TRAINING"
    QUERY = "QUERY"
    FINE_TUNE = "FINE_TUNE"
    OTHER = "OTHER"


def parse_percent(value) -> Fraction:
    """Exact percentage from an int, a decimal/fraction string or a float"""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise PolicyValidationError("percentage must be a number, not a boolean")
    if isinstance(value, float):
        return Fraction(str(value))
    try:
        return Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise PolicyValidationError(f"invalid percentage {value!r}") from e


def _parse_hash(value) -> bytes:
    if isinstance(value, (bytes, bytearray)):
        digest = bytes(value)
    else:
        try:
            digest = bytes.fromhex(str(value))
        except ValueError as e:
            raise PolicyValidationError(f"program hash {value!r} is not hex") from e
    if len(digest) != HASH_LENGTH:
        raise PolicyValidationError(f"program hash must be {HASH_LENGTH} bytes, got {len(digest)}")
    return digest


def _parse_uuid(value) -> uuid.UUID:
    try:
        return coerce_uuid(value)
    except (TypeError, ValueError) as e:
        raise PolicyValidationError(f"invalid UUID {value!r}") from e


@dataclass(frozen=True)
class Rule:
    """Base class of all constraint rules"""
    rule_type: ClassVar[int]

    def encode_params(self) -> bytes:
        raise NotImplementedError

    def sort_key(self) -> Tuple[int, bytes]:
        return int(self.type_code), self.encode_params()

    @property
    def type_code(self) -> int:
        return int(self.rule_type)

    @property
    def section(self) -> Optional[Section]:
        return RULE_SECTIONS.get(self.rule_type)

    def params_dict(self) -> Dict[str, Any]:
        return {}

    def to_dict(self) -> Dict[str, Any]:
        return {"rule_type": RuleType(self.rule_type).name, "parameters": self.params_dict()}


@dataclass(frozen=True)
class ShareCapRule(Rule):
    """Input rule: the custodian's share of the dataset must not exceed cap_percent"""
    cap_percent: Fraction
    rule_type: ClassVar[int] = RuleType.SHARE_CAP

    def __post_init__(self):
        cap = parse_percent(self.cap_percent)
        if not 0 < cap <= 100:
            raise PolicyValidationError(f"SHARE_CAP cap must be in (0,100], got {cap}")
        if cap.numerator > U64_MAX or cap.denominator > U64_MAX:
            raise PolicyValidationError(f"SHARE_CAP cap {cap} does not fit a u64 fraction")
        object.__setattr__(self, "cap_percent", cap)

    def encode_params(self) -> bytes:
        return ByteWriter().u64(self.cap_percent.numerator).u64(self.cap_percent.denominator).getvalue()

    def params_dict(self) -> Dict[str, Any]:
        return {"cap_percent": str(self.cap_percent)}


@dataclass(frozen=True)
class ProgramHashRule(Rule):
    """Program rule: the consumer program's digest must be one of allowed_hashes"""
    allowed_hashes: frozenset
    rule_type: ClassVar[int] = RuleType.PROGRAM_HASH

    def __post_init__(self):
        hashes = frozenset(_parse_hash(h) for h in self.allowed_hashes)
        if not hashes:
            raise PolicyValidationError("PROGRAM_HASH needs at least one hash")
        object.__setattr__(self, "allowed_hashes", hashes)

    def encode_params(self) -> bytes:
        writer = ByteWriter().u16(len(self.allowed_hashes))
        for digest in sorted(self.allowed_hashes):
            writer.raw(digest)
        return writer.getvalue()

    def params_dict(self) -> Dict[str, Any]:
        return {"allowed_hashes": [h.hex() for h in sorted(self.allowed_hashes)]}


@dataclass(frozen=True)
class CustodianRule(Rule):
    """Output rule: the derived PAD's custodian must be required_custodian"""
    required_custodian: uuid.UUID
    rule_type: ClassVar[int] = RuleType.CUSTODIAN

    def __post_init__(self):
        object.__setattr__(self, "required_custodian", _parse_uuid(self.required_custodian))

    def encode_params(self) -> bytes:
        return self.required_custodian.bytes

    def params_dict(self) -> Dict[str, Any]:
        return {"required_custodian": str(self.required_custodian)}


@dataclass(frozen=True)
class AuthUserRule(Rule):
    """Input rule: the program owner must be one of authorized_owners"""
    authorized_owners: frozenset
    rule_type: ClassVar[int] = RuleType.AUTH_USER

    def __post_init__(self):
        owners = frozenset(_parse_uuid(o) for o in self.authorized_owners)
        if not owners:
            raise PolicyValidationError("AUTH_USER needs at least one owner")
        object.__setattr__(self, "authorized_owners", owners)

    def encode_params(self) -> bytes:
        writer = ByteWriter().u16(len(self.authorized_owners))
        for owner in sorted(self.authorized_owners, key=lambda u: u.bytes):
            writer.uuid(owner)
        return writer.getvalue()

    def params_dict(self) -> Dict[str, Any]:
        return {"authorized_owners": [str(o) for o in sorted(self.authorized_owners, key=lambda u: u.bytes)]}


@dataclass(frozen=True)
class RateLimitRule(Rule):
    """Input rule: query programs of each owner are limited to R[owner] evaluations per minute"""
    per_owner_limits: Tuple[Tuple[uuid.UUID, int], ...]
    rule_type: ClassVar[int] = RuleType.RATE_LIMIT

    def __post_init__(self):
        items = self.per_owner_limits
        if isinstance(items, Mapping):
            items = items.items()
        limits: Dict[uuid.UUID, int] = {}
        for owner, limit in items:
            owner_id = _parse_uuid(owner)
            if isinstance(limit, bool) or not isinstance(limit, int) or limit < 1:
                raise PolicyValidationError(f"RATE_LIMIT for {owner_id} must be an integer >= 1, got {limit!r}")
            if limit > U32_MAX:
                raise PolicyValidationError(f"RATE_LIMIT for {owner_id} exceeds {U32_MAX} queries per minute")
            if owner_id in limits:
                raise PolicyValidationError(f"RATE_LIMIT lists owner {owner_id} twice")
            limits[owner_id] = limit
        if not limits:
            raise PolicyValidationError("RATE_LIMIT needs at least one owner")
        object.__setattr__(self, "per_owner_limits",
                           tuple(sorted(limits.items(), key=lambda kv: kv[0].bytes)))

    @property
    def limits(self) -> Dict[uuid.UUID, int]:
        return dict(self.per_owner_limits)

    def encode_params(self) -> bytes:
        writer = ByteWriter().u16(len(self.per_owner_limits))
        for owner, limit in self.per_owner_limits:
            writer.uuid(owner).u32(limit)
        return writer.getvalue()

    def params_dict(self) -> Dict[str, Any]:
        return {"per_owner_limits": {str(owner): limit for owner, limit in self.per_owner_limits}}


@dataclass(frozen=True)
class SamePolicyRule(Rule):
    """Output rule: derived data must carry this policy verbatim (additions allowed)"""
    rule_type: ClassVar[int] = RuleType.SAME_POLICY

    def encode_params(self) -> bytes:
        return b""


@dataclass(frozen=True)
class UnknownRule(Rule):
    """A rule_type this build does not know; kept byte-exact, denies every check"""
    code: int
    raw_params: bytes = b""
    rule_type: ClassVar[int] = 0

    @property
    def type_code(self) -> int:
        return self.code

    @property
    def section(self) -> Optional[Section]:
        return None

    def encode_params(self) -> bytes:
        return self.raw_params

    def to_dict(self) -> Dict[str, Any]:
        return {"rule_type": self.code, "parameters": {"raw": self.raw_params.hex()}}


def rule_from_dict(data: Mapping[str, Any]) -> Rule:
    """Build a rule from its JSON authoring form {"rule_type": "...", "parameters": {...}}"""
    if not isinstance(data, Mapping) or "rule_type" not in data:
        raise PolicyValidationError(f"rule must be an object with a rule_type, got {data!r}")
    name = data["rule_type"]
    try:
        rule_type = RuleType[str(name).upper()]
    except KeyError as e:
        raise PolicyValidationError(f"unknown rule_type {name!r}") from e
    params = dict(data.get("parameters") or {})
    try:
        if rule_type is RuleType.SHARE_CAP:
            return ShareCapRule(cap_percent=params["cap_percent"])
        if rule_type is RuleType.PROGRAM_HASH:
            return ProgramHashRule(allowed_hashes=frozenset(params["allowed_hashes"]))
        if rule_type is RuleType.CUSTODIAN:
            return CustodianRule(required_custodian=params["required_custodian"])
        if rule_type is RuleType.AUTH_USER:
            return AuthUserRule(authorized_owners=frozenset(params["authorized_owners"]))
        if rule_type is RuleType.RATE_LIMIT:
            limits = params["per_owner_limits"]
            return RateLimitRule(per_owner_limits=tuple(dict(limits).items()))
        return SamePolicyRule()
    except KeyError as e:
        raise PolicyValidationError(f"{rule_type.name} is missing parameter {e.args[0]!r}") from e


def _decode_rule_params(code: int, params: bytes) -> Rule:
    try:
        rule_type = RuleType(code)
    except ValueError:
        return UnknownRule(code=code, raw_params=params)

    reader = ByteReader(params)
    if rule_type is RuleType.SHARE_CAP:
        numerator, denominator = reader.u64(), reader.u64()
        if denominator == 0:
            raise PolicyDecodeError("SHARE_CAP denominator is zero")
        rule = ShareCapRule(cap_percent=Fraction(numerator, denominator))
    elif rule_type is RuleType.PROGRAM_HASH:
        count = reader.u16()
        rule = ProgramHashRule(allowed_hashes=frozenset(reader.raw(HASH_LENGTH) for _ in range(count)))
    elif rule_type is RuleType.CUSTODIAN:
        rule = CustodianRule(required_custodian=reader.uuid())
    elif rule_type is RuleType.AUTH_USER:
        count = reader.u16()
        rule = AuthUserRule(authorized_owners=frozenset(reader.uuid() for _ in range(count)))
    elif rule_type is RuleType.RATE_LIMIT:
        count = reader.u16()
        rule = RateLimitRule(per_owner_limits=tuple((reader.uuid(), reader.u32()) for _ in range(count)))
    else:
        rule = SamePolicyRule()
    reader.expect_end()
    if rule.encode_params() != params:
        raise PolicyDecodeError(f"{rule_type.name} parameters are not in canonical form")
    return rule


@dataclass(frozen=True)
class Policy:
    """One policy in one policy language with its three constraint sections"""
    policy_lang_id: uuid.UUID
    input_constraints: Tuple[Rule, ...] = ()
    program_constraints: Tuple[Rule, ...] = ()
    output_constraints: Tuple[Rule, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "policy_lang_id", _parse_uuid(self.policy_lang_id))
        for section in Section:
            rules = tuple(getattr(self, section.value))
            for rule in rules:
                if not isinstance(rule, Rule):
                    raise PolicyValidationError(f"{section.value} contains a non-rule {rule!r}")
                if rule.section is not None and rule.section is not section:
                    raise PolicyValidationError(
                        f"{RuleType(rule.rule_type).name} belongs in {rule.section.value}, not {section.value}")
            object.__setattr__(self, section.value, tuple(sorted(rules, key=Rule.sort_key)))

    def rules(self, section: Section = None) -> Tuple[Rule, ...]:
        if section is not None:
            return getattr(self, section.value)
        return self.input_constraints + self.program_constraints + self.output_constraints

    def rules_of(self, rule_type: RuleType) -> List[Rule]:
        return [rule for rule in self.rules() if rule.type_code == int(rule_type)]

    def has_unknown_rules(self) -> bool:
        return any(isinstance(rule, UnknownRule) for rule in self.rules())

    def with_rules(self, *rules: Rule) -> "Policy":
        """Copy of this policy with extra rules added to their sections"""
        sections = {section: list(getattr(self, section.value)) for section in Section}
        for rule in rules:
            sections[rule.section].append(rule)
        return Policy(self.policy_lang_id, *(tuple(sections[s]) for s in Section))

    def without_rule_type(self, rule_type: RuleType) -> "Policy":
        sections = [tuple(r for r in getattr(self, s.value) if r.type_code != int(rule_type)) for s in Section]
        return Policy(self.policy_lang_id, *sections)

    def to_dict(self) -> Dict[str, Any]:
        data = {"policy_lang_id": str(self.policy_lang_id)}
        for section in Section:
            data[section.value] = [rule.to_dict() for rule in getattr(self, section.value)]
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Policy":
        if not isinstance(data, Mapping):
            raise PolicyValidationError(f"policy must be an object, got {type(data).__name__}")
        lang = data.get("policy_lang_id")
        if lang is None:
            raise PolicyValidationError("policy is missing policy_lang_id")
        lang_id = POLICY_LANG_ALIASES.get(str(lang).lower()) or _parse_uuid(lang)
        sections = []
        for section in Section:
            raw_rules = data.get(section.value) or []
            if not isinstance(raw_rules, list):
                raise PolicyValidationError(f"{section.value} must be a list")
            sections.append(tuple(rule_from_dict(r) for r in raw_rules))
        return cls(lang_id, *sections)


def canonical_encode(policy: Policy) -> bytes:
    """Deterministic bytes; logically equal policies (up to rule order) encode equally"""
    writer = ByteWriter().uuid(policy.policy_lang_id)
    for section in Section:
        rules = sorted(getattr(policy, section.value), key=Rule.sort_key)
        writer.u16(len(rules))
        for rule in rules:
            writer.u16(rule.type_code).bytes32(rule.encode_params())
    return writer.getvalue()


def _decode_policy_from(reader: ByteReader) -> Policy:
    lang_id = reader.uuid()
    sections = []
    for section in Section:
        count = reader.u16()
        rules = []
        for _ in range(count):
            code = reader.u16()
            params = reader.bytes32()
            rules.append(_decode_rule_params(code, params))
        keys = [rule.sort_key() for rule in rules]
        if keys != sorted(keys):
            raise PolicyDecodeError(f"{section.value} rules are not in canonical order")
        sections.append(tuple(rules))
    return Policy(lang_id, *sections)


def decode_policy(data: bytes) -> Policy:
    """Inverse of canonical_encode; rejects non-canonical input"""
    reader = ByteReader(data)
    try:
        policy = _decode_policy_from(reader)
        reader.expect_end()
    except DecodeError as e:
        raise PolicyDecodeError(str(e)) from e
    except PolicyValidationError as e:
        raise PolicyDecodeError(f"decoded policy is invalid: {e}") from e
    return policy


def policy_set_contains(outer: Iterable[Policy], inner: Policy) -> bool:
    """True iff some policy in outer canonical-encodes equal to inner"""
    target = canonical_encode(inner)
    return any(canonical_encode(candidate) == target for candidate in outer)


def policies_from_json(data) -> List[Policy]:
    """A single policy object or a list of them"""
    if isinstance(data, Mapping) and "policies" in data:
        data = data["policies"]
    if isinstance(data, Mapping):
        data = [data]
    if not isinstance(data, list):
        raise PolicyValidationError("policy document must be an object or a list of objects")
    return [Policy.from_dict(item) for item in data]


@dataclass(frozen=True)
class ProgramManifest:
    """Identity of a consumer program as registered with the middleware"""
    program_hash: bytes
    owner_id: uuid.UUID
    program_kind: ProgramKind = ProgramKind.OTHER

    def __post_init__(self):
        if len(self.program_hash) != HASH_LENGTH:
            raise PolicyValidationError(f"program hash must be {HASH_LENGTH} bytes")
        object.__setattr__(self, "owner_id", _parse_uuid(self.owner_id))
        object.__setattr__(self, "program_kind", ProgramKind(self.program_kind))

    @classmethod
    def from_artifact(cls, artifact: bytes, owner_id, program_kind: ProgramKind) -> "ProgramManifest":
        """Manifest whose hash is computed over the exact program bytes"""
        return cls(hashlib.sha256(artifact).digest(), owner_id, program_kind)

    def matches(self, artifact: bytes) -> bool:
        return hashlib.sha256(artifact).digest() == self.program_hash

    def to_dict(self) -> Dict[str, Any]:
        return {
            "program_hash": self.program_hash.hex(),
            "owner_id": str(self.owner_id),
            "program_kind": self.program_kind.value,
        }
