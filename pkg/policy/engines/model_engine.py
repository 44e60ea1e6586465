# policy/engines/model_engine.py
"""
Policy engine for model data.

Input: PROGRAM_HASH and AUTH_USER are checked first; query programs are then
counted against every RATE_LIMIT rule. Output: fine-tuned models must keep the
required custodian and carry each SAME_POLICY policy verbatim.
"""
import logging
from typing import Callable, List, Optional, Sequence

from pad.codec import DecryptedPad
from policy.engines.base import OutputProposal, PolicyEngine
from policy.model import (
    MODEL_POLICY_LANG_ID,
    ProgramKind,
    ProgramManifest,
    RuleType,
    policy_set_contains,
)
from policy.rate_limiter import QueryRateLimiter

logger = logging.getLogger(__name__)


class ModelPolicyEngine(PolicyEngine):
    name = "model"
    policy_lang_id = MODEL_POLICY_LANG_ID
    understood_rules = frozenset({
        RuleType.PROGRAM_HASH,
        RuleType.AUTH_USER,
        RuleType.RATE_LIMIT,
        RuleType.CUSTODIAN,
        RuleType.SAME_POLICY,
    })

    def __init__(self, clock: Callable[[], float] = None, rate_limiter: QueryRateLimiter = None):
        self.rate_limiter = rate_limiter or QueryRateLimiter(clock=clock)

    def input_eval(self, pads: Sequence[DecryptedPad], program: ProgramManifest) -> bool:
        phase = "input"
        if not self.check_supported(pads, phase):
            return False

        owner = program.owner_id
        for pad in pads:
            for policy in self.policies_of(pad):
                for rule in policy.rules_of(RuleType.PROGRAM_HASH):
                    if program.program_hash not in rule.allowed_hashes:
                        return self.decide(phase, False,
                                           f"program {program.program_hash.hex()[:16]} not allowed by {pad.data_id}")
                for rule in policy.rules_of(RuleType.AUTH_USER):
                    if owner not in rule.authorized_owners:
                        return self.decide(phase, False, f"owner {owner} not authorized by {pad.data_id}")

        if program.program_kind is not ProgramKind.QUERY:
            return self.decide(phase, True, f"owner {owner}, {program.program_kind.value} program")

        # Owners missing from a rate table are denied before any budget is used
        per_pad_limits: List[tuple] = []
        for pad in pads:
            limits = []
            for policy in self.policies_of(pad):
                for rule in policy.rules_of(RuleType.RATE_LIMIT):
                    table = rule.limits
                    if owner not in table:
                        return self.decide(phase, False, f"owner {owner} not in the rate table of {pad.data_id}")
                    limits.append(table[owner])
            if limits:
                per_pad_limits.append((pad, limits))

        now = self.rate_limiter.now()
        verdict = True
        for pad, limits in per_pad_limits:
            admitted, count = self.rate_limiter.admit(pad.data_id, owner, limits, now)
            if not admitted:
                verdict = self.decide(phase, False,
                                      f"owner {owner} made {count} queries this minute on {pad.data_id}, "
                                      f"limit {min(limits)}")
        if verdict:
            return self.decide(phase, True, f"owner {owner}, query admitted")
        return verdict

    def output_eval(self, proposal: OutputProposal, pads: Sequence[DecryptedPad],
                    program: Optional[ProgramManifest] = None) -> bool:
        phase = "output"
        if not self.check_supported(pads, phase):
            return False
        fine_tune = program is not None and program.program_kind is ProgramKind.FINE_TUNE
        if not fine_tune:
            return self.decide(phase, True, "output rules apply to fine-tuning only")

        for pad in pads:
            for policy in self.policies_of(pad):
                for rule in policy.rules_of(RuleType.CUSTODIAN):
                    if proposal.custodian_id != rule.required_custodian:
                        return self.decide(phase, False,
                                           f"output custodian {proposal.custodian_id} but {pad.data_id} "
                                           f"requires {rule.required_custodian}")
                if policy.rules_of(RuleType.SAME_POLICY) and not policy_set_contains(proposal.policies, policy):
                    return self.decide(phase, False, f"output drops the policy of {pad.data_id}")
        return self.decide(phase, True, f"custodian {proposal.custodian_id}, policies inherited")
