# middleware/consumer_middleware.py
"""
Consumer middleware: the enforcement core between consumer programs and PADs.

PADs are staged into one-shot datasets, checked jointly against the input
policies of every language they carry, released entry by entry only after a
passing check, and every derived output is sealed into a new PAD only after
all engines approve it.
"""
import itertools
import logging
import uuid
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Dict, List, Tuple

from delegator.errors import DelegatorError
from middleware import phases
from middleware.dataset import Dataset, DenialReason, EntryView, Verdict
from middleware.errors import (
    DelegatorUnreachable,
    DuplicateEntry,
    EmptyDataset,
    IndexOutOfRange,
    NoProgramBound,
    NotChecked,
    OutputDenied,
    PolicyDenied,
    UnknownDataset,
)
from middleware.secret_store import SecretStore
from pad.codec import DecryptedPad, decrypt_payload, pack_pad, parse_metadata
from pad.crypto_suite import get_suite
from pad.metadata import PadMetadata
from pad.payload import PlaintextPayload
from policy.engines.base import OutputProposal, PolicyEngine
from policy.engines.registry import EngineRegistry, default_registry
from policy.model import ProgramManifest
from utils.common_utils import new_uuid
from utils.logging_config import LogExecutionTime, PhaseRecorder

logger = logging.getLogger(__name__)

EngineGroups = List[Tuple[PolicyEngine, Tuple[DecryptedPad, ...]]]


@dataclass
class MiddlewareStats:
    datasets: int = 0
    pads_loaded: int = 0
    checks: int = 0
    checks_passed: int = 0
    accesses: int = 0
    output_approvals: int = 0
    output_denials: int = 0
    outputs_emitted: int = 0

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


class ConsumerMiddleware:
    def __init__(self, secret_store: SecretStore, registry: EngineRegistry = None, recorder: PhaseRecorder = None):
        self.secret_store = secret_store
        self.registry = registry or default_registry()
        self.recorder = recorder
        self.stats = MiddlewareStats()
        self._datasets: Dict[int, Dataset] = {}
        self._handles = itertools.count(1)

    def _timed(self, phase: str) -> LogExecutionTime:
        return LogExecutionTime(phase, __name__, self.recorder)

    def _dataset(self, handle: int) -> Dataset:
        dataset = self._datasets.get(handle)
        if dataset is None:
            raise UnknownDataset(f"no dataset with handle {handle}")
        return dataset

    def verdict_of(self, handle: int) -> Verdict:
        return self._dataset(handle).verdict

    def size_of(self, handle: int) -> int:
        return len(self._dataset(handle))

    def describe(self, handle: int) -> str:
        return self._dataset(handle).describe()

    def dataset_new(self) -> int:
        with self._timed(phases.NEW_DATASET):
            handle = next(self._handles)
            self._datasets[handle] = Dataset(handle)
        self.stats.datasets += 1
        return handle

    async def dataset_add(self, handle: int, pad_bytes: bytes):
        """Resolve the key, decrypt and stage one PAD; on any error nothing is staged"""
        dataset = self._dataset(handle)
        with self._timed(phases.LOAD_TOTAL):
            metadata = parse_metadata(pad_bytes)
            if dataset.contains(metadata.data_id):
                raise DuplicateEntry(f"{metadata.data_id} is already staged in dataset {handle}")

            data_key = await self.secret_store.get(metadata.data_id, metadata.key_delegator_uri)
            with self._timed(phases.LOAD_DECRYPT):
                payload = decrypt_payload(pad_bytes, data_key)
            with self._timed(phases.LOAD_POLICY_MATCHING):
                unmatched = [lang for lang in payload.policy_langs() if lang not in self.registry]
            dataset.stage(DecryptedPad(metadata, payload))

        self.stats.pads_loaded += 1
        if unmatched:
            logger.info(f"{metadata.data_id} carries policy languages without an engine: "
                        f"{', '.join(str(lang) for lang in unmatched)}")

    def _engine_groups(self, dataset: Dataset) -> Tuple[EngineGroups, List[uuid.UUID]]:
        by_lang: Dict[uuid.UUID, List[DecryptedPad]] = defaultdict(list)
        for entry in dataset.entries:
            for lang in dict.fromkeys(entry.payload.policy_langs()):
                by_lang[lang].append(entry)

        groups: EngineGroups = []
        missing: List[uuid.UUID] = []
        for lang in sorted(by_lang, key=str):
            engine = self.registry.get(lang)
            if engine is None:
                missing.append(lang)
            else:
                groups.append((engine, tuple(by_lang[lang])))
        return groups, missing

    def dataset_check(self, handle: int, program: ProgramManifest) -> bool:
        """Run every engine's input evaluation over the current entry set and bind the program"""
        dataset = self._dataset(handle)
        if not dataset.entries:
            raise EmptyDataset(f"dataset {handle} is empty")
        self.stats.checks += 1

        with self._timed(phases.POLICY_EVAL_TOTAL):
            with self._timed(phases.POLICY_EVAL_INIT):
                groups, missing = self._engine_groups(dataset)
            if missing:
                dataset.set_verdict(False, program, DenialReason.NO_ENGINE)
                logger.info(f"❌ Dataset {handle} denied: no engine for {', '.join(map(str, missing))}")
                return False

            with self._timed(phases.POLICY_EVAL_COPY):
                inputs = [(engine, list(pads)) for engine, pads in groups]
            with self._timed(phases.POLICY_EVAL_EVAL):
                passed = all(engine.input_eval(pads, program) for engine, pads in inputs)
            with self._timed(phases.POLICY_EVAL_POST):
                dataset.set_verdict(passed, program, None if passed else DenialReason.INPUT_CONSTRAINT)

        if passed:
            self.stats.checks_passed += 1
        logger.info(f"{'✅' if passed else '❌'} Dataset {handle} ({len(dataset)} PADs) "
                    f"{dataset.describe()} for {program.program_kind.value} program")
        return passed

    def _require_passed(self, dataset: Dataset):
        if dataset.verdict is Verdict.UNCHECKED:
            raise NotChecked(f"dataset {dataset.handle} has not passed a policy check")
        if dataset.verdict is Verdict.DENIED:
            raise PolicyDenied(f"dataset {dataset.handle} is {dataset.describe()}")

    def dataset_access(self, handle: int, index: int) -> EntryView:
        dataset = self._dataset(handle)
        self._require_passed(dataset)
        if not 0 <= index < len(dataset):
            raise IndexOutOfRange(f"index {index} outside dataset {handle} of {len(dataset)} entries")
        with self._timed(phases.ACCESS_DATA):
            view = dataset.view(index)
        self.stats.accesses += 1
        return view

    async def propose_output(self, handle: int, proposal: OutputProposal) -> bytes:
        """
        Seal derived data into a new PAD.

        Every engine governing the inputs must approve the proposal. The new
        key is provisioned at the proposal's delegator before the PAD bytes
        are returned; if that fails the PAD is withheld.
        """
        dataset = self._dataset(handle)
        self._require_passed(dataset)
        program = dataset.bound_program
        if program is None:
            raise NoProgramBound(f"dataset {handle} has no bound program")

        with self._timed(phases.OUTPUT_TOTAL):
            with self._timed(phases.OUTPUT_INIT):
                groups, missing = self._engine_groups(dataset)
            if missing:
                self.stats.output_denials += 1
                raise OutputDenied(f"no engine for {', '.join(map(str, missing))}")
            with self._timed(phases.OUTPUT_COPY):
                inputs = [(engine, list(pads)) for engine, pads in groups]
            with self._timed(phases.OUTPUT_EVAL):
                denied_by = next(
                    (engine.name for engine, pads in inputs if not engine.output_eval(proposal, pads, program)),
                    None)
            with self._timed(phases.OUTPUT_POST):
                if denied_by is not None:
                    self.stats.output_denials += 1
                else:
                    self.stats.output_approvals += 1
            if denied_by is not None:
                raise OutputDenied(f"{denied_by} output constraints reject the proposal")

            with self._timed(phases.OUTPUT_GENERATE_PAD):
                data_id, data_key, pad_bytes = self._seal(proposal)
            try:
                await self.secret_store.push_to_delegator(
                    data_id, bytes(data_key), None, proposal.delegator_uri, custodian_id=proposal.custodian_id)
            except DelegatorError as e:
                raise DelegatorUnreachable(
                    f"key for {data_id} could not be provisioned at {proposal.delegator_uri}: [{e.code}] {e}"
                ) from e
            finally:
                data_key[:] = bytes(len(data_key))

        self.stats.outputs_emitted += 1
        logger.info(f"✅ Emitted derived PAD {data_id} for custodian {proposal.custodian_id}")
        return pad_bytes

    @staticmethod
    def _seal(proposal: OutputProposal) -> Tuple[uuid.UUID, bytearray, bytes]:
        suite = get_suite(proposal.crypto_suite)
        data_key = bytearray(suite.generate_key())
        data_id = new_uuid()
        payload = PlaintextPayload(proposal.raw_data, proposal.policies, proposal.attributes)
        metadata = PadMetadata(data_id, proposal.custodian_id, proposal.crypto_suite, proposal.delegator_uri)
        return data_id, data_key, pack_pad(payload, metadata, bytes(data_key))

    def discard(self, handle: int):
        self._datasets.pop(handle, None)

    async def close(self):
        await self.secret_store.close_sessions()
