# scenario/policies.py
"""Policy builders for the hospital collaboration"""
import uuid
from typing import Iterable, Mapping

from policy.model import (
    MODEL_POLICY_LANG_ID,
    TRAINING_POLICY_LANG_ID,
    AuthUserRule,
    CustodianRule,
    ProgramHashRule,
    RateLimitRule,
    Policy,
    SamePolicyRule,
    ShareCapRule,
    parse_percent,
)


def training_data_policy(cap_percent, training_hash: bytes, output_custodian: uuid.UUID) -> Policy:
    """Share cap on input, the training program only, derived models held by output_custodian"""
    return Policy(
        TRAINING_POLICY_LANG_ID,
        input_constraints=(ShareCapRule(parse_percent(cap_percent)),),
        program_constraints=(ProgramHashRule(frozenset({training_hash})),),
        output_constraints=(CustodianRule(output_custodian),),
    )


def model_policy(owners: Iterable[uuid.UUID], rate_limits: Mapping[uuid.UUID, int],
                 program_hashes: Iterable[bytes], custodian: uuid.UUID) -> Policy:
    """Owners and per-owner query rates on input, query/fine-tune programs only, custody kept on derivation"""
    return Policy(
        MODEL_POLICY_LANG_ID,
        input_constraints=(AuthUserRule(frozenset(owners)), RateLimitRule(tuple(rate_limits.items()))),
        program_constraints=(ProgramHashRule(frozenset(program_hashes)),),
        output_constraints=(CustodianRule(custodian), SamePolicyRule()),
    )


def owner_restriction(owners: Iterable[uuid.UUID]) -> Policy:
    return Policy(MODEL_POLICY_LANG_ID, input_constraints=(AuthUserRule(frozenset(owners)),))


def private_samples_policy(fine_tune_hash: bytes) -> Policy:
    """Sensitive samples usable only by the fine-tuning program"""
    return Policy(TRAINING_POLICY_LANG_ID, program_constraints=(ProgramHashRule(frozenset({fine_tune_hash})),))
