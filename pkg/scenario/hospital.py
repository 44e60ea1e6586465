# scenario/hospital.py
"""
Hospital collaboration scenario.

Hospitals seal their training data into PADs, a joint model is trained under
their share caps, queried under per-owner rate limits and fine-tuned under
the model's inherited policy. Every walkthrough outcome is computed
independently from the scenario description and compared with what the middleware decides.
"""
import json
import logging
import uuid
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from config.config import DEFAULT_CRYPTO_SUITE, ConfigError
from consumers import load_program, perturbed, program_artifact
from consumers.models import format_samples
from middleware.consumer_middleware import ConsumerMiddleware
from middleware.consumer_runner import ConsumerExit, ConsumerProgram, run_consumer
from pad.payload import DATA_COUNT_ATTRIBUTE, DataAttribute
from policy.engines.registry import default_registry
from policy.model import ProgramKind, RuleType, parse_percent
from producer.producer import ProducerConfig
from scenario.deployment import LoopbackDeployment
from scenario.policies import model_policy, owner_restriction, private_samples_policy, training_data_policy
from scenario.timing import breakdown_table
from utils.common_utils import sha256_digest
from utils.logging_config import PhaseRecorder

logger = logging.getLogger(__name__)

SCENARIO_NAMESPACE = uuid.UUID("0d1f5c7a-3b2e-4e8a-9c61-7f4a2b9d8e10")
SCENARIO_EPOCH = 1_700_000_040.0  # start of a whole minute


def entity_id(name: str) -> uuid.UUID:
    return uuid.uuid5(SCENARIO_NAMESPACE, name)


class HospitalSpec(BaseModel):
    name: str
    entry_count: int = Field(gt=0)
    share_cap: float
    custodian_id: Optional[uuid.UUID] = None
    query_rate_per_minute: int = Field(5, ge=1)

    @field_validator("share_cap")
    @classmethod
    def _cap_range(cls, value: float) -> float:
        if not 0 < value <= 100:
            raise ValueError("share_cap must be in (0, 100]")
        return value

    def identity(self) -> uuid.UUID:
        return self.custodian_id or entity_id(self.name)


class ScenarioSpec(BaseModel):
    hospitals: List[HospitalSpec] = Field(min_length=1)
    output_custodian: str = "D"
    outside_owner: str = "E"
    programs: Dict[str, str] = Field(default_factory=dict)
    delegators: int = Field(1, ge=1)
    features: int = Field(4, ge=1)
    queries_per_owner: int = Field(30, ge=1)
    crypto_suite: int = DEFAULT_CRYPTO_SUITE
    quote_latency_ms: float = Field(0.0, ge=0)
    seed: int = 7

    @field_validator("programs")
    @classmethod
    def _program_kinds(cls, value: Dict[str, str]) -> Dict[str, str]:
        for kind in value:
            if kind.upper() not in ProgramKind.__members__:
                raise ValueError(f"unknown program kind {kind!r}")
        return value

    @model_validator(mode="after")
    def _unique_names(self):
        names = [h.name for h in self.hospitals]
        if len(set(names)) != len(names):
            raise ValueError("hospital names must be unique")
        if self.output_custodian in names or self.outside_owner in names:
            raise ValueError("output custodian and outside owner must not be hospitals")
        return self


def default_spec() -> ScenarioSpec:
    return ScenarioSpec(hospitals=[
        HospitalSpec(name="A", entry_count=100, share_cap=60, query_rate_per_minute=10),
        HospitalSpec(name="B", entry_count=50, share_cap=30, query_rate_per_minute=5),
        HospitalSpec(name="C", entry_count=50, share_cap=40, query_rate_per_minute=5),
    ])


def load_scenario_spec(path) -> ScenarioSpec:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigError(f"scenario spec not found: {path}") from e
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read scenario spec {path}: {e}") from e
    try:
        spec = ScenarioSpec.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid scenario spec {path}: {e}") from e
    # artifact paths are relative to the scenario file
    spec.programs = {kind: str((path.parent / p).resolve()) for kind, p in spec.programs.items()}
    return spec


@dataclass
class CaseResult:
    name: str
    expected: str
    observed: str
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.expected == self.observed

    def line(self) -> str:
        status = "OK" if self.ok else "FAIL"
        label = f"EXPECTED-{self.expected}" if self.expected != "SKIP" else "SKIPPED"
        suffix = f" ({self.detail})" if self.detail else ""
        return f"[{status}] {self.name}: {label}, observed {self.observed}{suffix}"


@dataclass
class ScenarioReport:
    cases: List[CaseResult] = field(default_factory=list)
    timing: Optional[pd.DataFrame] = None
    attestations: int = 0

    @property
    def passed(self) -> bool:
        return all(case.ok for case in self.cases)

    def failures(self) -> List[CaseResult]:
        return [case for case in self.cases if not case.ok]


def expected_training_check(hospitals: Sequence[HospitalSpec], trainer_matches: bool) -> bool:
    """Independent oracle: every share within its cap and the approved trainer"""
    if not trainer_matches:
        return False
    totals: Dict[uuid.UUID, int] = {}
    for hospital in hospitals:
        totals[hospital.identity()] = totals.get(hospital.identity(), 0) + hospital.entry_count
    total = sum(totals.values())
    return all(Fraction(totals[h.identity()] * 100, total) <= parse_percent(h.share_cap) for h in hospitals)


class VirtualClock:
    def __init__(self, start: float = SCENARIO_EPOCH):
        self.current = start

    def __call__(self) -> float:
        return self.current

    def advance(self, seconds: float):
        self.current += seconds


class HospitalScenario:
    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self.report = ScenarioReport()
        self.clock = VirtualClock()
        self.rng = np.random.default_rng(spec.seed)
        self.approved = {kind: program_artifact(kind) for kind in
                         (ProgramKind.TRAINING, ProgramKind.QUERY, ProgramKind.FINE_TUNE)}
        self.hashes = {kind: sha256_digest(artifact) for kind, artifact in self.approved.items()}
        self.hospital_pads: Dict[str, bytes] = {}
        self.cold = PhaseRecorder()
        self.warm = PhaseRecorder()

    def _artifact(self, kind: ProgramKind) -> bytes:
        path = self.spec.programs.get(kind.value.lower())
        if path is None:
            return self.approved[kind]
        try:
            return Path(path).read_bytes()
        except OSError as e:
            raise ConfigError(f"cannot read {kind.value.lower()} program artifact {path}: {e}") from e

    def _program(self, kind: ProgramKind, owner: uuid.UUID, artifact: bytes = None) -> ConsumerProgram:
        return load_program(kind, owner, self._artifact(kind) if artifact is None else artifact)

    def _record(self, name: str, expected: bool, observed: bool, detail: str = ""):
        outcome = self._outcome(expected), self._outcome(observed)
        case = CaseResult(name, outcome[0], outcome[1], detail)
        self.report.cases.append(case)
        (logger.info if case.ok else logger.error)(case.line())

    @staticmethod
    def _outcome(passed: bool) -> str:
        return "PASS" if passed else "DENY"

    def _skip(self, name: str, reason: str):
        self.report.cases.append(CaseResult(name, "SKIP", "SKIP", reason))

    async def run(self) -> ScenarioReport:
        spec = self.spec
        async with LoopbackDeployment(spec.delegators, spec.quote_latency_ms) as deployment:
            self.deployment = deployment
            self.output_custodian = entity_id(spec.output_custodian)
            await self._produce_hospital_pads()

            middleware = deployment.middleware(default_registry(self.clock), recorder=self.cold)
            model_pad = await self._training_cases(middleware)
            self.report.timing = breakdown_table(self.cold, self.warm)
            self.report.attestations = middleware.secret_store.stats.attestations

            if model_pad is None:
                for name in ("query.rate_limit", "fine_tune.augmented_policy", "fine_tune.drop_auth_user",
                             "fine_tune.drop_rate_limit", "derived.reload"):
                    self._skip(name, "no model was trained")
            else:
                await self._query_cases(middleware, model_pad)
                await self._fine_tune_cases(middleware, model_pad)
        return self.report

    async def _produce_hospital_pads(self):
        producer = self.deployment.producer()
        for index, hospital in enumerate(self.spec.hospitals):
            credential = self.deployment.custodian(hospital.name, hospital.identity())
            samples = self.rng.normal(loc=index, scale=1.0, size=(hospital.entry_count, self.spec.features))
            policy = training_data_policy(hospital.share_cap, self.hashes[ProgramKind.TRAINING],
                                          self.output_custodian)
            config = ProducerConfig(credential, self.deployment.uri_for(index), (policy,), self.spec.crypto_suite)
            attributes = (DataAttribute.uint64(DATA_COUNT_ATTRIBUTE, hospital.entry_count),
                          DataAttribute.string("hospital", hospital.name))
            self.hospital_pads[hospital.name], _ = await producer.produce(format_samples(samples), attributes, config)

    def _training_params(self, custodian: uuid.UUID) -> dict:
        owners = [h.identity() for h in self.spec.hospitals]
        rates = {h.identity(): h.query_rate_per_minute for h in self.spec.hospitals}
        self.model_policy = model_policy(owners, rates,
                                         [self.hashes[ProgramKind.QUERY], self.hashes[ProgramKind.FINE_TUNE]],
                                         self.output_custodian)
        return {"output_policies": [self.model_policy], "output_custodian": custodian,
                "output_delegator": self.deployment.uri_for(0)}

    async def _train(self, middleware: ConsumerMiddleware, hospitals: Sequence[HospitalSpec],
                     custodian: uuid.UUID, artifact: bytes = None) -> ConsumerExit:
        owner = hospitals[0].identity() if hospitals else self.spec.hospitals[0].identity()
        program = self._program(ProgramKind.TRAINING, owner, artifact)
        inputs = [self.hospital_pads[h.name] for h in hospitals]
        return await run_consumer(program, middleware, inputs, self._training_params(custodian))

    async def _training_cases(self, middleware: ConsumerMiddleware) -> Optional[bytes]:
        hospitals = self.spec.hospitals
        trainer_matches = self._artifact(ProgramKind.TRAINING) == self.approved[ProgramKind.TRAINING]
        expected = expected_training_check(hospitals, trainer_matches)

        exit_ = await self._train(middleware, hospitals, self.output_custodian)
        emitted = exit_.result.get("output") is not None
        self._record("training.all_hospitals", expected, exit_.result["check"],
                     f"{len(hospitals)} PADs, {sum(h.entry_count for h in hospitals)} entries")
        if exit_.result["check"]:
            self._record("training.output_joint_custodian", True, emitted, f"custodian {self.spec.output_custodian}")

        used_delegators = len({self.deployment.uri_for(i) for i in range(len(hospitals))})
        stats = middleware.secret_store.stats
        self._record("load.attestation_amortized", True,
                     stats.attestations == used_delegators and stats.fetches == len(hospitals),
                     f"{stats.attestations} attestations, {stats.fetches} fetches for {len(hospitals)} PADs")

        if len(hospitals) > 1:
            subset = hospitals[:-1]
            result = await self._train(middleware, subset, self.output_custodian)
            self._record("training.input_constraint", expected_training_check(subset, trainer_matches),
                         result.result["check"], f"without {hospitals[-1].name}")
        else:
            self._skip("training.input_constraint", "a single hospital has no subset")

        middleware.recorder = middleware.secret_store.recorder = self.warm
        wrong = perturbed(self.approved[ProgramKind.TRAINING])
        result = await self._train(middleware, hospitals, self.output_custodian, artifact=wrong)
        self._record("training.program_constraint", False, result.result["check"], "one artifact byte flipped")
        middleware.recorder = middleware.secret_store.recorder = self.cold

        if exit_.result["check"]:
            result = await self._train(middleware, hospitals, hospitals[0].identity())
            self._record("training.output_custodian", False, result.result.get("output") is not None,
                         f"custodian {hospitals[0].name} instead of {self.spec.output_custodian}")
        else:
            self._skip("training.output_custodian", "the training check does not pass")

        return exit_.result.get("output")

    async def _query(self, middleware: ConsumerMiddleware, model_pad: bytes, owner: uuid.UUID) -> bool:
        program = self._program(ProgramKind.QUERY, owner)
        exit_ = await run_consumer(program, middleware, [model_pad], {"features": [0.0] * self.spec.features})
        return exit_.result["check"]

    async def _query_cases(self, middleware: ConsumerMiddleware, model_pad: bytes):
        queries = self.spec.queries_per_owner
        for hospital in self.spec.hospitals:
            admitted = 0
            for _ in range(queries):
                admitted += await self._query(middleware, model_pad, hospital.identity())
            expected = min(queries, hospital.query_rate_per_minute)
            self._record(f"query.rate_limit.{hospital.name}", True, admitted == expected,
                         f"{admitted}/{queries} admitted, limit {hospital.query_rate_per_minute}/min")

        outsider = entity_id(self.spec.outside_owner)
        self._record("query.unauthorized_owner", False, await self._query(middleware, model_pad, outsider),
                     f"owner {self.spec.outside_owner}")

        self.clock.advance(60)
        first = self.spec.hospitals[0]
        self._record("query.next_window", True, await self._query(middleware, model_pad, first.identity()),
                     f"owner {first.name} after the window rolled")

    async def _fine_tune(self, middleware: ConsumerMiddleware, model_pad: bytes, policies) -> ConsumerExit:
        owner = self.spec.hospitals[0]
        credential = self.deployment.custodian(owner.name)
        samples = self.rng.normal(size=(10, self.spec.features))
        config = ProducerConfig(credential, self.deployment.uri_for(0),
                                (private_samples_policy(self.hashes[ProgramKind.FINE_TUNE]),), self.spec.crypto_suite)
        private_pad, _ = await self.deployment.producer().produce(format_samples(samples), (), config)
        params = {"output_policies": policies, "output_custodian": self.output_custodian,
                  "output_delegator": self.deployment.uri_for(0)}
        program = self._program(ProgramKind.FINE_TUNE, owner.identity())
        return await run_consumer(program, middleware, [model_pad, private_pad], params)

    async def _fine_tune_cases(self, middleware: ConsumerMiddleware, model_pad: bytes):
        owner = self.spec.hospitals[0]
        restriction = owner_restriction([owner.identity()])

        augmented = await self._fine_tune(middleware, model_pad, [self.model_policy, restriction])
        tuned_pad = augmented.result.get("output")
        self._record("fine_tune.augmented_policy", True, tuned_pad is not None,
                     f"only {owner.name} may use the refined model")

        dropped_auth = self.model_policy.without_rule_type(RuleType.AUTH_USER)
        result = await self._fine_tune(middleware, model_pad, [dropped_auth, restriction])
        self._record("fine_tune.drop_auth_user", False, result.result.get("output") is not None)

        dropped_rate = self.model_policy.without_rule_type(RuleType.RATE_LIMIT)
        result = await self._fine_tune(middleware, model_pad, [dropped_rate, restriction])
        self._record("fine_tune.drop_rate_limit", False, result.result.get("output") is not None)

        if tuned_pad is None:
            self._skip("derived.reload", "no refined model was emitted")
            return
        fresh = self.deployment.middleware(default_registry(self.clock))
        self._record("derived.reload.owner", True, await self._query(fresh, tuned_pad, owner.identity()),
                     f"fresh middleware, owner {owner.name}")
        if len(self.spec.hospitals) > 1:
            other = self.spec.hospitals[1]
            self._record("derived.reload.other_hospital", False,
                         await self._query(fresh, tuned_pad, other.identity()),
                         f"{other.name} is excluded by the added restriction")


async def run_hospital_scenario(spec: ScenarioSpec = None) -> ScenarioReport:
    return await HospitalScenario(spec or default_spec()).run()
