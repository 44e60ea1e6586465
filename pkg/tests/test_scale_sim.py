import numpy as np
import pytest

from config.config import ConfigError
from simulation import (
    SWEEP_COLUMNS,
    EventKind,
    LatencyModel,
    SimConfig,
    SimSweepSpec,
    closed_form_per_pad_ms,
    grid,
    load_sim_spec,
    simulate,
    sweep,
)
from simulation.errors import InvalidSimConfig
from tests.conftest import fixture_path

FIXED = LatencyModel().deterministic()


def fixed(n: int, m: int, k: int, seed: int = 7) -> SimConfig:
    return SimConfig(n, m, k, seed, FIXED)


def test_single_consumer_matches_closed_form():
    result = simulate(fixed(1, 1, 1))
    assert result.mean_per_pad_ms == pytest.approx(135.266, abs=1e-9)
    assert result.attestations_performed == 1
    assert result.fetches_performed == 1


def test_large_batches_amortize_attestation():
    result = simulate(fixed(4, 4, 1024))
    assert result.mean_per_pad_ms == pytest.approx(closed_form_per_pad_ms(FIXED, 1024), abs=1e-9)
    assert result.mean_per_pad_ms == pytest.approx(0.309, abs=1e-3)


def test_per_pad_latency_falls_with_batch_size():
    latencies = [simulate(fixed(2, 4, k)).mean_per_pad_ms for k in (1, 4, 16, 64, 256)]
    assert latencies == sorted(latencies, reverse=True)


def test_enough_delegators_isolate_consumers():
    alone = simulate(fixed(1, 1, 8)).mean_per_pad_ms
    assert simulate(fixed(8, 8, 8)).mean_per_pad_ms == pytest.approx(alone, abs=1e-9)
    assert simulate(fixed(16, 8, 8)).mean_per_pad_ms == pytest.approx(alone, abs=1e-9)


@pytest.mark.parametrize("consumers", [2, 3, 5, 8])
def test_one_delegator_serves_single_requests_in_turn(consumers):
    # each consumer waits for everyone ahead of it
    unit = closed_form_per_pad_ms(FIXED, 1)
    result = simulate(fixed(1, consumers, 1))
    assert result.mean_per_pad_ms == pytest.approx(unit * (consumers + 1) / 2, rel=1e-9)
    assert result.makespan == pytest.approx(unit * consumers, rel=1e-9)


def test_contention_grows_with_surplus_consumers():
    means = [simulate(fixed(4, m, 4)).mean_per_pad_ms for m in (4, 8, 16, 32)]
    assert means == sorted(means)
    assert means[0] < means[-1]


def test_same_seed_same_run():
    config = SimConfig(3, 10, 16, seed=99)
    first, second = simulate(config), simulate(config)
    assert first.per_pad_latency == second.per_pad_latency
    assert first.events == second.events
    assert simulate(SimConfig(3, 10, 16, seed=100)).per_pad_latency != first.per_pad_latency


def test_every_request_is_served_once():
    config = SimConfig(3, 7, 5, seed=11)
    result = simulate(config)
    starts = [e for e in result.events if e.kind is EventKind.START]
    assert len(starts) == 35
    assert len({(e.consumer, e.request) for e in starts}) == 35
    assert result.attestations_performed == 7
    assert result.makespan == pytest.approx(max(result.completion_ms(c) for c in range(7)))


def test_invalid_configs():
    with pytest.raises(InvalidSimConfig):
        SimConfig(0, 1, 1)
    with pytest.raises(InvalidSimConfig):
        SimConfig(1, 1, 1, seed=2 ** 64)
    with pytest.raises(InvalidSimConfig):
        LatencyModel(attest_mean_ms=0)


def test_sweep_has_one_row_per_cell():
    configs = grid([1, 2], [2, 3], [1, 4], seed=5, latency=FIXED)
    table = sweep(configs)
    assert list(table.columns) == SWEEP_COLUMNS
    assert len(table) == 8
    assert list(table["seed"]) == list(range(5, 13))
    assert (table["max_per_pad_ms"] >= table["mean_per_pad_ms"] - 1e-12).all()


def test_default_sweep_file_loads():
    spec = load_sim_spec(fixture_path("../../config/sim_default.json"))
    assert spec.delegators == [4, 16, 64]
    assert len(spec.configs()) == 3 * 3 * 11
    assert not spec.latency().is_deterministic
    assert SimSweepSpec(deterministic=True).latency().is_deterministic


def test_bad_sweep_files(tmp_path):
    with pytest.raises(ConfigError):
        load_sim_spec(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{"delegators": [0]}', encoding="utf-8")
    with pytest.raises(ConfigError):
        load_sim_spec(bad)


def test_single_delegator_makespan_is_linear_in_surplus_consumers():
    consumers = np.arange(2, 66)
    makespans = np.array([simulate(fixed(1, int(m), 8)).makespan for m in consumers])
    slope, intercept = np.polyfit(consumers - 1, makespans, 1)
    residual = makespans - (slope * (consumers - 1) + intercept)
    r_squared = 1 - residual.var() / makespans.var()
    assert r_squared > 0.999
    assert slope == pytest.approx(FIXED.attest_mean_ms + 8 * FIXED.fetch_mean_ms, rel=1e-6)


def test_makespan_never_beats_total_work():
    for n, m, k in ((2, 5, 3), (4, 9, 16), (3, 20, 2)):
        result = simulate(fixed(n, m, k))
        work = m * (FIXED.attest_mean_ms + k * FIXED.fetch_mean_ms)
        assert result.makespan >= work / n - 1e-9


@pytest.mark.parametrize("n, m, k", [(4, 4, 64), (4, 8, 64), (4, 4, 256), (4, 8, 256)])
def test_stochastic_runs_track_the_deterministic_curve(n, m, k):
    noisy = simulate(SimConfig(n, m, k, seed=3)).mean_per_pad_ms
    exact = simulate(fixed(n, m, k)).mean_per_pad_ms
    assert noisy == pytest.approx(exact, rel=0.15)
