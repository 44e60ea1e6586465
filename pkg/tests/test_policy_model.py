import json
import uuid
from fractions import Fraction

import pytest

from policy.errors import PolicyDecodeError, PolicyValidationError
from policy.model import (
    MODEL_POLICY_LANG_ID,
    TRAINING_POLICY_LANG_ID,
    AuthUserRule,
    CustodianRule,
    Policy,
    ProgramHashRule,
    RateLimitRule,
    RuleType,
    SamePolicyRule,
    ShareCapRule,
    UnknownRule,
    canonical_encode,
    decode_policy,
    policies_from_json,
    policy_set_contains,
)
from tests.conftest import fixture_path

OWNER_A = uuid.UUID("00000000-0000-0000-0000-00000000000a")
OWNER_B = uuid.UUID("00000000-0000-0000-0000-00000000000b")


def model_policy(*extra_input):
    return Policy(
        MODEL_POLICY_LANG_ID,
        input_constraints=(AuthUserRule(frozenset({OWNER_A, OWNER_B})),
                           RateLimitRule({OWNER_A: 10, OWNER_B: 5})) + tuple(extra_input),
        program_constraints=(ProgramHashRule(frozenset({bytes(32)})),),
        output_constraints=(CustodianRule(OWNER_A), SamePolicyRule()),
    )


def test_canonical_encoding_ignores_rule_order():
    forward = Policy(TRAINING_POLICY_LANG_ID,
                     input_constraints=(ShareCapRule(60),),
                     program_constraints=(ProgramHashRule(frozenset({bytes(32), b"\x01" * 32})),))
    backward = Policy(TRAINING_POLICY_LANG_ID,
                      program_constraints=(ProgramHashRule(frozenset({b"\x01" * 32, bytes(32)})),),
                      input_constraints=(ShareCapRule("60"),))
    assert canonical_encode(forward) == canonical_encode(backward)
    assert forward == backward


def test_decode_inverts_canonical_encode():
    policy = model_policy()
    assert decode_policy(canonical_encode(policy)) == policy


def test_decode_rejects_trailing_bytes():
    with pytest.raises(PolicyDecodeError):
        decode_policy(canonical_encode(model_policy()) + b"\x00")


def test_unknown_rule_survives_encoding_byte_exact():
    policy = Policy(TRAINING_POLICY_LANG_ID, input_constraints=(UnknownRule(code=0x4242, raw_params=b"geo:eu"),))
    decoded = decode_policy(canonical_encode(policy))
    assert canonical_encode(decoded) == canonical_encode(policy)
    assert decoded.has_unknown_rules()


def test_share_cap_is_exact():
    assert ShareCapRule("33.3").cap_percent == Fraction(333, 10)
    assert ShareCapRule(0.1).cap_percent == Fraction(1, 10)
    for bad in (0, -5, 100.5, "abc"):
        with pytest.raises(PolicyValidationError):
            ShareCapRule(bad)


def test_rules_must_sit_in_their_section():
    with pytest.raises(PolicyValidationError):
        Policy(TRAINING_POLICY_LANG_ID, output_constraints=(ShareCapRule(50),))


def test_rate_limits_must_be_positive_and_unique():
    with pytest.raises(PolicyValidationError):
        RateLimitRule({OWNER_A: 0})
    with pytest.raises(PolicyValidationError):
        RateLimitRule(((OWNER_A, 1), (str(OWNER_A), 2)))


def test_rule_values_must_fit_the_canonical_encoding():
    for bad in (1e-30, "1/18446744073709551616", Fraction(1, 2 ** 64)):
        with pytest.raises(PolicyValidationError):
            ShareCapRule(bad)
    widest = ShareCapRule(Fraction(1, 2 ** 64 - 1))
    assert decode_policy(canonical_encode(Policy(TRAINING_POLICY_LANG_ID, input_constraints=(widest,)))) \
        .input_constraints == (widest,)

    with pytest.raises(PolicyValidationError):
        RateLimitRule({OWNER_A: 2 ** 32})
    assert RateLimitRule({OWNER_A: 2 ** 32 - 1}).limits == {OWNER_A: 2 ** 32 - 1}

    document = {"policy_lang_id": "training",
                "input_constraints": [{"rule_type": "SHARE_CAP", "parameters": {"cap_percent": "1e-30"}}]}
    with pytest.raises(PolicyValidationError):
        policies_from_json(document)


def test_program_hash_must_be_a_digest():
    with pytest.raises(PolicyValidationError):
        ProgramHashRule(frozenset({b"short"}))


def test_set_membership_uses_canonical_equality():
    policy = model_policy()
    reordered = Policy(
        MODEL_POLICY_LANG_ID,
        input_constraints=(RateLimitRule({OWNER_B: 5, OWNER_A: 10}), AuthUserRule(frozenset({OWNER_B, OWNER_A}))),
        program_constraints=policy.program_constraints,
        output_constraints=(SamePolicyRule(), CustodianRule(OWNER_A)),
    )
    assert policy_set_contains([reordered], policy)
    assert not policy_set_contains([policy.without_rule_type(RuleType.AUTH_USER)], policy)


def test_json_round_trip_and_aliases():
    policy = model_policy()
    restored = Policy.from_dict(json.loads(json.dumps(policy.to_dict())))
    assert restored == policy

    with open(fixture_path("policy.json"), encoding="utf-8") as f:
        policies = policies_from_json(json.load(f))
    assert len(policies) == 1
    assert policies[0].policy_lang_id == TRAINING_POLICY_LANG_ID
    assert policies[0].rules_of(RuleType.SHARE_CAP)[0].cap_percent == 60


def test_unknown_rule_type_in_json_is_rejected():
    with open(fixture_path("policy_unknown_rule.json"), encoding="utf-8") as f:
        data = json.load(f)
    with pytest.raises(PolicyValidationError):
        policies_from_json(data)
