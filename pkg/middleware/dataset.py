# middleware/dataset.py
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

from pad.codec import DecryptedPad
from pad.payload import DataAttribute
from policy.model import Policy, ProgramManifest


class Verdict(Enum):
    UNCHECKED = "unchecked"
    PASSED = "passed"
    DENIED = "denied"


class DenialReason(Enum):
    INPUT_CONSTRAINT = "input_constraint"
    NO_ENGINE = "no_engine"


@dataclass(frozen=True)
class EntryView:
    """Read-only view of a staged entry handed out after a passing check"""
    data_id: uuid.UUID
    custodian_id: uuid.UUID
    raw_data: bytes
    attributes: Tuple[DataAttribute, ...]
    policies: Tuple[Policy, ...]

    def attribute(self, name: str) -> Optional[DataAttribute]:
        for attribute in self.attributes:
            if attribute.attribute_name == name:
                return attribute
        return None


@dataclass
class Dataset:
    """
    A one-shot dataset: decrypted PADs staged access-locked until a check
    over the current entry set passes. Adding an entry resets the verdict.
    """
    handle: int
    entries: List[DecryptedPad] = field(default_factory=list)
    verdict: Verdict = Verdict.UNCHECKED
    denial_reason: Optional[DenialReason] = None
    bound_program: Optional[ProgramManifest] = None

    def __len__(self) -> int:
        return len(self.entries)

    def contains(self, data_id: uuid.UUID) -> bool:
        return any(entry.data_id == data_id for entry in self.entries)

    def stage(self, entry: DecryptedPad):
        self.entries.append(entry)
        self.reset_verdict()

    def reset_verdict(self):
        self.verdict = Verdict.UNCHECKED
        self.denial_reason = None
        self.bound_program = None

    def set_verdict(self, passed: bool, program: ProgramManifest, reason: DenialReason = None):
        self.verdict = Verdict.PASSED if passed else Verdict.DENIED
        self.denial_reason = None if passed else reason
        self.bound_program = program

    def view(self, index: int) -> EntryView:
        entry = self.entries[index]
        return EntryView(
            data_id=entry.data_id,
            custodian_id=entry.custodian_id,
            raw_data=entry.payload.raw_data,
            attributes=entry.payload.attributes,
            policies=entry.payload.policies,
        )

    def describe(self) -> str:
        if self.verdict is Verdict.DENIED and self.denial_reason is not None:
            return f"DENIED({self.denial_reason.value})"
        return self.verdict.name
