# policy/engines/training_engine.py
"""
Policy engine for training data.

Input: every PAD's program must be allowed by its PROGRAM_HASH rules, and the
share of the dataset held by its custodian must not exceed its SHARE_CAP.
Output: the derived PAD's custodian must match every CUSTODIAN rule.
"""
import logging
import uuid
from collections import defaultdict
from fractions import Fraction
from typing import Dict, Optional, Sequence

from pad.codec import DecryptedPad
from pad.payload import DATA_COUNT_ATTRIBUTE, AttributeType
from policy.engines.base import OutputProposal, PolicyEngine
from policy.model import (
    TRAINING_POLICY_LANG_ID,
    CustodianRule,
    ProgramHashRule,
    ProgramManifest,
    RuleType,
    ShareCapRule,
)

logger = logging.getLogger(__name__)

SHARE_PER_CUSTODIAN = "custodian"
SHARE_PER_PAD = "pad"


def data_count_of(pad: DecryptedPad) -> Optional[int]:
    attribute = pad.payload.attribute(DATA_COUNT_ATTRIBUTE)
    if attribute is None or attribute.data_type_ref is not AttributeType.UINT64:
        return None
    return attribute.attribute_value


class TrainingPolicyEngine(PolicyEngine):
    name = "training"
    policy_lang_id = TRAINING_POLICY_LANG_ID
    understood_rules = frozenset({RuleType.SHARE_CAP, RuleType.PROGRAM_HASH, RuleType.CUSTODIAN})

    def __init__(self, share_basis: str = SHARE_PER_CUSTODIAN):
        if share_basis not in (SHARE_PER_CUSTODIAN, SHARE_PER_PAD):
            raise ValueError(f"unknown share basis {share_basis!r}")
        # "pad" compares each PAD's own count instead of its custodian's total
        self.share_basis = share_basis

    def input_eval(self, pads: Sequence[DecryptedPad], program: ProgramManifest) -> bool:
        phase = "input"
        if not self.check_supported(pads, phase):
            return False

        for pad in pads:
            for policy in self.policies_of(pad):
                for rule in policy.rules_of(RuleType.PROGRAM_HASH):
                    if program.program_hash not in rule.allowed_hashes:
                        return self.decide(phase, False,
                                           f"program {program.program_hash.hex()[:16]} not allowed by {pad.data_id}")

        capped = [pad for pad in pads if any(p.rules_of(RuleType.SHARE_CAP) for p in self.policies_of(pad))]
        if not capped:
            return self.decide(phase, True, f"{len(pads)} PADs, no share caps")

        counts: Dict[uuid.UUID, int] = {}
        for pad in pads:
            count = data_count_of(pad)
            if count is None:
                return self.decide(phase, False, f"{pad.data_id} has no {DATA_COUNT_ATTRIBUTE} attribute")
            counts[pad.data_id] = count

        total = sum(counts.values())
        if total == 0:
            return self.decide(phase, False, "dataset holds no entries")

        per_custodian: Dict[uuid.UUID, int] = defaultdict(int)
        for pad in pads:
            per_custodian[pad.custodian_id] += counts[pad.data_id]

        for pad in capped:
            held = per_custodian[pad.custodian_id] if self.share_basis == SHARE_PER_CUSTODIAN else counts[pad.data_id]
            share = Fraction(held * 100, total)
            for policy in self.policies_of(pad):
                for rule in policy.rules_of(RuleType.SHARE_CAP):
                    if share > rule.cap_percent:
                        return self.decide(
                            phase, False,
                            f"custodian {pad.custodian_id} holds {float(share):.3f}% > cap {float(rule.cap_percent):g}%")

        return self.decide(phase, True, f"{len(pads)} PADs, {len(per_custodian)} custodians, {total} entries")

    def output_eval(self, proposal: OutputProposal, pads: Sequence[DecryptedPad],
                    program: Optional[ProgramManifest] = None) -> bool:
        phase = "output"
        if not self.check_supported(pads, phase):
            return False
        for pad in pads:
            for policy in self.policies_of(pad):
                for rule in policy.rules_of(RuleType.CUSTODIAN):
                    if proposal.custodian_id != rule.required_custodian:
                        return self.decide(phase, False,
                                           f"output custodian {proposal.custodian_id} but {pad.data_id} "
                                           f"requires {rule.required_custodian}")
        return self.decide(phase, True, f"custodian {proposal.custodian_id}")
