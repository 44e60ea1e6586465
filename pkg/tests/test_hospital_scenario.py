import pandas as pd
import pytest

from config.config import ConfigError
from scenario.bench import run_bench
from scenario.hospital import HospitalSpec, default_spec, expected_training_check, load_scenario_spec, \
    run_hospital_scenario
from tests.conftest import fixture_path


def cases_of(report):
    return {case.name: case for case in report.cases}


@pytest.mark.asyncio
async def test_default_scenario_passes():
    report = await run_hospital_scenario()
    assert report.passed, [case.line() for case in report.failures()]

    cases = cases_of(report)
    assert cases["training.all_hospitals"].observed == "PASS"
    assert cases["training.input_constraint"].observed == "DENY"
    assert cases["training.program_constraint"].observed == "DENY"
    assert cases["training.output_custodian"].observed == "DENY"
    assert cases["query.unauthorized_owner"].observed == "DENY"
    assert cases["fine_tune.augmented_policy"].observed == "PASS"
    assert cases["fine_tune.drop_auth_user"].observed == "DENY"
    assert cases["derived.reload.other_hospital"].observed == "DENY"
    assert report.attestations == 1
    assert list(report.timing["phase"])[0] == "new_dataset"


@pytest.mark.asyncio
async def test_scenario_from_file():
    report = await run_hospital_scenario(load_scenario_spec(fixture_path("../../scenarios/hospital_default.json")))
    assert report.passed
    assert cases_of(report)["query.rate_limit.A"].ok


@pytest.mark.asyncio
async def test_without_the_third_hospital_training_is_denied():
    report = await run_hospital_scenario(load_scenario_spec(fixture_path("scenario_without_c.json")))
    assert report.passed
    cases = cases_of(report)
    assert cases["training.all_hospitals"].expected == "DENY"
    assert cases["query.rate_limit"].expected == "SKIP"


@pytest.mark.asyncio
async def test_unapproved_trainer_is_denied():
    report = await run_hospital_scenario(load_scenario_spec(fixture_path("scenario_wrong_trainer.json")))
    assert report.passed
    assert cases_of(report)["training.all_hospitals"].observed == "DENY"


def test_training_oracle():
    spec = default_spec()
    assert expected_training_check(spec.hospitals, True)
    assert not expected_training_check(spec.hospitals[:2], True)
    assert not expected_training_check(spec.hospitals, False)
    even = [HospitalSpec(name="X", entry_count=10, share_cap=50), HospitalSpec(name="Y", entry_count=10, share_cap=50)]
    assert expected_training_check(even, True)


def test_bad_scenario_files(tmp_path):
    with pytest.raises(ConfigError):
        load_scenario_spec(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{"hospitals": [{"name": "A", "entry_count": 1, "share_cap": 150}]}', encoding="utf-8")
    with pytest.raises(ConfigError):
        load_scenario_spec(bad)


@pytest.mark.asyncio
async def test_bench_warm_fetch_beats_cold():
    table = await run_bench(iterations=3, sizes=[256], custodians=2, pads_per_custodian=2, quote_latency_ms=1.0)
    rows = table.set_index("phase")
    assert rows.loc["load.fetch_key", "warm_ms"] < rows.loc["load.fetch_key", "cold_ms"]
    assert rows.loc["load.attestation", "cold_ms"] > 0
    assert (table["attestations_per_run"] == 1).all()
    assert rows.loc["output.generate_pad", "samples"] == 3


@pytest.mark.asyncio
async def test_warm_loads_are_a_fraction_of_cold_loads():
    # nine PADs from three custodians at one delegator
    table = await run_bench(iterations=2, sizes=[1024], custodians=3, pads_per_custodian=3, quote_latency_ms=20.0)
    rows = table.set_index("phase")
    assert rows.loc["load.attestation", "samples"] == 2
    assert pd.isna(rows.loc["load.attestation", "warm_ms"])
    assert rows.loc["load.total", "warm_ms"] < 0.1 * rows.loc["load.total", "cold_ms"]


@pytest.mark.asyncio
async def test_only_decrypt_follows_payload_size():
    table = await run_bench(iterations=2, sizes=[1024, 1 << 20], custodians=1, pads_per_custodian=2,
                            quote_latency_ms=20.0)
    small = table[table["payload_bytes"] == 1024].set_index("phase")
    large = table[table["payload_bytes"] == 1 << 20].set_index("phase")
    assert large.loc["load.decrypt", "cold_ms"] > small.loc["load.decrypt", "cold_ms"]
    ratio = large.loc["load.attestation", "cold_ms"] / small.loc["load.attestation", "cold_ms"]
    assert 0.5 < ratio < 2
