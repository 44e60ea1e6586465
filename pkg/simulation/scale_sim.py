# simulation/scale_sim.py
"""
Discrete-event simulation of M consumers each decrypting K PADs against N
key delegators behind a first-idle load balancer.

Only attestation and key fetching are modelled. A consumer attests once, on
its first served request, and fetches one key per PAD; its requests are
issued one after another. A delegator serves one request at a time and an
attestation occupies it for the whole quote exchange.
"""
import heapq
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, PositiveInt, ValidationError

from config.config import SIM_CONFIG, ConfigError
from delegator.dispatcher import FirstIdleAssigner
from simulation.errors import EventLogViolation, InvalidSimConfig
from utils.logging_config import LogExecutionTime, log_performance_metric

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["N", "M", "K", "seed", "mean_per_pad_ms", "max_per_pad_ms", "makespan_ms"]

# draws per sample before giving up on a positive value
_MAX_RESAMPLES = 10_000


@dataclass(frozen=True)
class LatencyModel:
    attest_mean_ms: float = SIM_CONFIG["attest_mean_ms"]
    attest_std_ms: float = SIM_CONFIG["attest_std_ms"]
    fetch_mean_ms: float = SIM_CONFIG["fetch_mean_ms"]
    fetch_std_ms: float = SIM_CONFIG["fetch_std_ms"]

    def __post_init__(self):
        if self.attest_mean_ms <= 0 or self.fetch_mean_ms <= 0:
            raise InvalidSimConfig("latency means must be positive")
        if self.attest_std_ms < 0 or self.fetch_std_ms < 0:
            raise InvalidSimConfig("latency standard deviations must not be negative")

    @property
    def is_deterministic(self) -> bool:
        return self.attest_std_ms == 0 and self.fetch_std_ms == 0

    def deterministic(self) -> "LatencyModel":
        return replace(self, attest_std_ms=0.0, fetch_std_ms=0.0)

    @staticmethod
    def _truncated_normal(rng: np.random.Generator, mean: float, std: float) -> float:
        if std == 0:
            return mean
        for _ in range(_MAX_RESAMPLES):
            value = rng.normal(mean, std)
            if value > 0:
                return float(value)
        raise InvalidSimConfig(f"no positive sample from N({mean}, {std}) after {_MAX_RESAMPLES} draws")

    def sample_attest(self, rng: np.random.Generator) -> float:
        return self._truncated_normal(rng, self.attest_mean_ms, self.attest_std_ms)

    def sample_fetch(self, rng: np.random.Generator) -> float:
        return self._truncated_normal(rng, self.fetch_mean_ms, self.fetch_std_ms)


@dataclass(frozen=True)
class SimConfig:
    num_delegators: int
    num_consumers: int
    pads_per_consumer: int
    seed: int = SIM_CONFIG["seed"]
    latency: LatencyModel = field(default_factory=LatencyModel)

    def __post_init__(self):
        for name in ("num_delegators", "num_consumers", "pads_per_consumer"):
            if getattr(self, name) < 1:
                raise InvalidSimConfig(f"{name} must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidSimConfig("seed must fit in 64 bits")


class EventKind(str, Enum):
    SUBMIT = "submit"
    START = "start"
    DONE = "done"


@dataclass(frozen=True)
class SimEvent:
    time_ms: float
    kind: EventKind
    consumer: int
    request: int
    delegator: Optional[int] = None
    attested: bool = False


@dataclass
class SimResult:
    config: SimConfig
    per_pad_latency: Dict[int, float]
    makespan: float
    attestations_performed: int
    fetches_performed: int
    events: List[SimEvent] = field(repr=False, default_factory=list)

    @property
    def mean_per_pad_ms(self) -> float:
        return float(np.mean(list(self.per_pad_latency.values())))

    @property
    def max_per_pad_ms(self) -> float:
        return max(self.per_pad_latency.values())

    def completion_ms(self, consumer: int) -> float:
        return self.per_pad_latency[consumer] * self.config.pads_per_consumer

    def row(self) -> dict:
        return {
            "N": self.config.num_delegators,
            "M": self.config.num_consumers,
            "K": self.config.pads_per_consumer,
            "seed": self.config.seed,
            "mean_per_pad_ms": self.mean_per_pad_ms,
            "max_per_pad_ms": self.max_per_pad_ms,
            "makespan_ms": self.makespan,
        }


class _Simulation:
    """One run over a virtual clock; completions are ordered by (time, sequence)"""

    def __init__(self, config: SimConfig):
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.assigner = FirstIdleAssigner(config.num_delegators)
        self.now = 0.0
        self.events: List[SimEvent] = []
        self._heap: list = []
        self._sequence = 0
        self._attested = [False] * config.num_consumers
        self._next_request = [0] * config.num_consumers
        self._finished_at: Dict[int, float] = {}

    def _log(self, kind: EventKind, consumer: int, request: int, delegator: int = None, attested: bool = False):
        self.events.append(SimEvent(self.now, kind, consumer, request, delegator, attested))

    def _submit(self, consumer: int):
        request = self._next_request[consumer]
        self._next_request[consumer] += 1
        self._log(EventKind.SUBMIT, consumer, request)
        index = self.assigner.acquire((consumer, request))
        if index is not None:
            self._start(consumer, request, index)

    def _start(self, consumer: int, request: int, delegator: int):
        latency = self.config.latency
        attest = not self._attested[consumer]
        cost = latency.sample_fetch(self.rng)
        if attest:
            cost += latency.sample_attest(self.rng)
            self._attested[consumer] = True
        self._log(EventKind.START, consumer, request, delegator, attest)
        heapq.heappush(self._heap, (self.now + cost, self._sequence, consumer, request, delegator))
        self._sequence += 1

    def _complete(self, consumer: int, request: int, delegator: int):
        self._log(EventKind.DONE, consumer, request, delegator)
        handover = self.assigner.release(delegator)
        if handover is not None:
            (next_consumer, next_request), index = handover
            self._start(next_consumer, next_request, index)
        if self._next_request[consumer] < self.config.pads_per_consumer:
            self._submit(consumer)
        else:
            self._finished_at[consumer] = self.now

    def _check_work_conserving(self):
        if self.assigner.queue_length() and self.assigner.idle_count():
            raise EventLogViolation(
                f"at t={self.now:.6f} ms {self.assigner.idle_count()} delegators idle "
                f"with {self.assigner.queue_length()} requests queued")

    def run(self) -> SimResult:
        for consumer in range(self.config.num_consumers):
            self._submit(consumer)
        self._check_work_conserving()
        while self._heap:
            self.now, _, consumer, request, delegator = heapq.heappop(self._heap)
            self._complete(consumer, request, delegator)
            self._check_work_conserving()

        k = self.config.pads_per_consumer
        return SimResult(
            config=self.config,
            per_pad_latency={c: t / k for c, t in sorted(self._finished_at.items())},
            makespan=max(self._finished_at.values()),
            attestations_performed=sum(1 for e in self.events if e.kind is EventKind.START and e.attested),
            fetches_performed=sum(1 for e in self.events if e.kind is EventKind.DONE),
            events=self.events,
        )


def verify_event_log(result: SimResult):
    """Raise EventLogViolation unless every request was served exactly once without overlap"""
    config = result.config
    expected = config.num_consumers * config.pads_per_consumer
    starts = [e for e in result.events if e.kind is EventKind.START]
    served = {(e.consumer, e.request) for e in starts}
    if len(starts) != expected or len(served) != expected or result.fetches_performed != expected:
        raise EventLogViolation(f"served {len(starts)} requests ({len(served)} distinct), expected {expected}")
    if result.attestations_performed > config.num_consumers:
        raise EventLogViolation(f"{result.attestations_performed} attestations for {config.num_consumers} consumers")

    busy_until: Dict[int, float] = {}
    running: Dict[int, tuple] = {}
    for event in result.events:
        if event.kind is EventKind.START:
            if event.delegator in running:
                raise EventLogViolation(f"delegator {event.delegator} started a request while busy")
            if event.time_ms < busy_until.get(event.delegator, 0.0):
                raise EventLogViolation(f"delegator {event.delegator} overlaps two requests")
            running[event.delegator] = (event.consumer, event.request)
        elif event.kind is EventKind.DONE:
            if running.pop(event.delegator, None) != (event.consumer, event.request):
                raise EventLogViolation(f"delegator {event.delegator} finished a request it did not start")
            busy_until[event.delegator] = event.time_ms


def simulate(config: SimConfig) -> SimResult:
    result = _Simulation(config).run()
    verify_event_log(result)
    logger.debug(
        f"N={config.num_delegators} M={config.num_consumers} K={config.pads_per_consumer}: "
        f"mean {result.mean_per_pad_ms:.3f} ms/PAD, makespan {result.makespan:.3f} ms")
    return result


def closed_form_per_pad_ms(latency: LatencyModel, pads_per_consumer: int) -> float:
    """Per-PAD latency of a consumer with a dedicated delegator and no variance"""
    return (latency.attest_mean_ms + pads_per_consumer * latency.fetch_mean_ms) / pads_per_consumer


def grid(delegators: Iterable[int], consumers: Iterable[int], pads_per_consumer: Iterable[int],
         seed: int = SIM_CONFIG["seed"], latency: LatencyModel = None) -> List[SimConfig]:
    """Cartesian grid of configs; each cell gets seed + its index"""
    latency = latency or LatencyModel()
    cells = [(n, m, k) for n in delegators for m in consumers for k in pads_per_consumer]
    return [SimConfig(n, m, k, seed + i, latency) for i, (n, m, k) in enumerate(cells)]


def _row(config: SimConfig) -> dict:
    return simulate(config).row()


def sweep(configs: Sequence[SimConfig], workers: int = 1) -> pd.DataFrame:
    """One simulate per config, in config order"""
    with LogExecutionTime(f"sweep of {len(configs)} cells", __name__):
        if workers > 1 and len(configs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(_row, configs))
        else:
            rows = [_row(config) for config in configs]
    table = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    if len(table):
        log_performance_metric("sim.mean_per_pad", float(table["mean_per_pad_ms"].mean()),
                               context={"cells": len(table)})
    return table


class SimSweepSpec(BaseModel):
    """File form of a sweep; omitted fields fall back to SIM_CONFIG"""
    delegators: List[PositiveInt] = Field(default_factory=lambda: list(SIM_CONFIG["delegators"]), min_length=1)
    consumers: List[PositiveInt] = Field(default_factory=lambda: list(SIM_CONFIG["consumers"]), min_length=1)
    pads_per_consumer: List[PositiveInt] = Field(
        default_factory=lambda: list(SIM_CONFIG["pads_per_consumer"]), min_length=1)
    seed: int = Field(SIM_CONFIG["seed"], ge=0, lt=2 ** 64)
    attest_mean_ms: float = Field(SIM_CONFIG["attest_mean_ms"], gt=0)
    attest_std_ms: float = Field(SIM_CONFIG["attest_std_ms"], ge=0)
    fetch_mean_ms: float = Field(SIM_CONFIG["fetch_mean_ms"], gt=0)
    fetch_std_ms: float = Field(SIM_CONFIG["fetch_std_ms"], ge=0)
    deterministic: bool = False
    workers: PositiveInt = 1

    def latency(self) -> LatencyModel:
        model = LatencyModel(self.attest_mean_ms, self.attest_std_ms, self.fetch_mean_ms, self.fetch_std_ms)
        return model.deterministic() if self.deterministic else model

    def configs(self) -> List[SimConfig]:
        return grid(self.delegators, self.consumers, self.pads_per_consumer, self.seed, self.latency())


def load_sim_spec(path) -> SimSweepSpec:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigError(f"simulation config not found: {path}") from e
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read simulation config {path}: {e}") from e
    try:
        return SimSweepSpec.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid simulation config {path}: {e}") from e


def run_sweep(spec: SimSweepSpec = None) -> pd.DataFrame:
    spec = spec or SimSweepSpec()
    logger.info(f"Simulating {len(spec.delegators) * len(spec.consumers) * len(spec.pads_per_consumer)} cells")
    return sweep(spec.configs(), spec.workers)
