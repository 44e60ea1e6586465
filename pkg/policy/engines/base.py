# policy/engines/base.py
import logging
import uuid
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

from config.config import DEFAULT_CRYPTO_SUITE
from pad.codec import DecryptedPad
from pad.payload import DataAttribute
from policy.errors import PolicyValidationError
from policy.model import Policy, ProgramManifest, Rule, RuleType, UnknownRule
from utils.common_utils import coerce_uuid, parse_host_port
from utils.logging_config import log_policy_decision

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OutputProposal:
    """Derived data a consumer asks the middleware to seal into a new PAD"""
    raw_data: bytes
    policies: Tuple[Policy, ...]
    custodian_id: uuid.UUID
    delegator_uri: str
    attributes: Tuple[DataAttribute, ...] = ()
    crypto_suite: int = DEFAULT_CRYPTO_SUITE

    def __post_init__(self):
        object.__setattr__(self, "raw_data", bytes(self.raw_data))
        object.__setattr__(self, "policies", tuple(self.policies))
        object.__setattr__(self, "attributes", tuple(self.attributes))
        if not self.policies:
            raise PolicyValidationError("an output proposal needs at least one policy")
        try:
            object.__setattr__(self, "custodian_id", coerce_uuid(self.custodian_id))
            parse_host_port(self.delegator_uri)
        except (TypeError, ValueError) as e:
            raise PolicyValidationError(f"invalid output proposal: {e}") from e


class PolicyEngine(ABC):
    """
    A policy language implementation.

    Both evaluations return a boolean only and deny on any rule kind the
    language does not define.
    """
    name: str = "engine"
    policy_lang_id: uuid.UUID
    understood_rules: FrozenSet[RuleType] = frozenset()

    def policies_of(self, pad: DecryptedPad) -> List[Policy]:
        return [p for p in pad.payload.policies if p.policy_lang_id == self.policy_lang_id]

    def unsupported_rules(self, policy: Policy) -> List[Rule]:
        return [
            rule for rule in policy.rules()
            if isinstance(rule, UnknownRule) or RuleType(rule.rule_type) not in self.understood_rules
        ]

    def check_supported(self, pads: Iterable[DecryptedPad], phase: str) -> bool:
        for pad in pads:
            for policy in self.policies_of(pad):
                unsupported = self.unsupported_rules(policy)
                if unsupported:
                    return self.decide(phase, False,
                                       f"{pad.data_id} carries rule type {unsupported[0].type_code} "
                                       f"outside the {self.name} language")
        return True

    def decide(self, phase: str, verdict: bool, details: str = None) -> bool:
        log_policy_decision(self.name, phase, verdict, details)
        if not verdict:
            logger.info(f"❌ {self.name} {phase} denied: {details}")
        return verdict

    @abstractmethod
    def input_eval(self, pads: Sequence[DecryptedPad], program: ProgramManifest) -> bool:
        """Verdict on using these PADs with the program"""

    @abstractmethod
    def output_eval(self, proposal: OutputProposal, pads: Sequence[DecryptedPad],
                    program: Optional[ProgramManifest] = None) -> bool:
        """Verdict on releasing the proposal derived from these PADs"""
