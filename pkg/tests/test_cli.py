import json

import pytest

from main import main
from pad.codec import open_pad
from tests.conftest import fixture_path


@pytest.fixture
def packed(tmp_path, capsys):
    pad_path, key_path = tmp_path / "a.pad", tmp_path / "a.key"
    code = main(["pack", "--payload", fixture_path("payload.json"), "--policy", fixture_path("policy.json"),
                 "--key-out", str(key_path), "--out", str(pad_path)])
    assert code == 0
    data_id = capsys.readouterr().out.strip()
    return pad_path, key_path, data_id


def test_pack_then_inspect(packed, capsys):
    pad_path, key_path, data_id = packed
    key_hex = key_path.read_text(encoding="utf-8").strip()

    assert main(["inspect", str(pad_path)]) == 0
    out = capsys.readouterr().out
    shown = json.loads(out)
    assert shown["data_id"] == data_id
    assert shown["custodian_id"] == "3f9a0c6e-2b1d-4c7e-8a55-6d0e9b4f1a23"
    assert shown["key_delegator_uri"] == "127.0.0.1:7400"
    assert shown["crypto_suite"] == "0x0001"
    assert "systolic" not in out
    assert key_hex not in out

    opened = open_pad(pad_path.read_bytes(), bytes.fromhex(key_hex))
    assert opened.payload.raw_data.startswith(b"age,systolic")
    assert str(opened.data_id) == data_id


def test_pack_with_chacha(tmp_path, capsys):
    assert main(["pack", "--payload", fixture_path("payload.json"), "--policy", fixture_path("policy.json"),
                 "--key-out", str(tmp_path / "k"), "--out", str(tmp_path / "p"), "--suite", "0x0002"]) == 0
    capsys.readouterr()
    assert main(["inspect", str(tmp_path / "p")]) == 0
    assert json.loads(capsys.readouterr().out)["crypto_suite"] == "0x0002"


def test_unknown_rule_type_fails(tmp_path, capsys):
    code = main(["pack", "--payload", fixture_path("payload.json"), "--policy", fixture_path("policy_unknown_rule.json"),
                 "--key-out", str(tmp_path / "k"), "--out", str(tmp_path / "p")])
    assert code != 0
    assert "ERROR[POLICY_INVALID]" in capsys.readouterr().err
    assert not (tmp_path / "p").exists()


def pack_args(key_out, out):
    return ["pack", "--payload", fixture_path("payload.json"), "--policy", fixture_path("policy.json"),
            "--key-out", str(key_out), "--out", str(out)]


def error_lines(capsys):
    return [line for line in capsys.readouterr().err.splitlines() if line.startswith("ERROR[")]


def test_unwritable_key_file_leaves_no_pad(tmp_path, capsys):
    pad_path, key_path = tmp_path / "p.pad", tmp_path / "missing-dir" / "p.key"
    assert main(pack_args(key_path, pad_path)) == 1
    lines = error_lines(capsys)
    assert lines[0].startswith("ERROR[WRITE_FAILED]")
    assert str(key_path) in lines[0]
    assert not pad_path.exists()


def test_unwritable_pad_leaves_no_key(tmp_path, capsys):
    pad_path, key_path = tmp_path / "missing-dir" / "p.pad", tmp_path / "p.key"
    assert main(pack_args(key_path, pad_path)) == 1
    assert error_lines(capsys)[0].startswith("ERROR[WRITE_FAILED]")
    assert not key_path.exists()


def test_missing_file_is_named(tmp_path, capsys):
    missing = tmp_path / "nowhere.pad"
    assert main(["inspect", str(missing)]) == 1
    lines = [line for line in capsys.readouterr().err.splitlines() if line.startswith("ERROR[")]
    assert len(lines) == 1
    assert lines[0].startswith("ERROR[FILE_NOT_FOUND]")
    assert str(missing) in lines[0]


def test_truncated_pad_fails(packed, tmp_path, capsys):
    pad_path, _, _ = packed
    cut = tmp_path / "cut.pad"
    cut.write_bytes(pad_path.read_bytes()[:-5])
    assert main(["inspect", str(cut)]) == 1
    assert "TRUNCATED_INPUT" in capsys.readouterr().err


def test_simulate_is_reproducible(tmp_path, capsys):
    config = tmp_path / "sim.json"
    config.write_text(json.dumps({"delegators": [1, 2], "consumers": [3], "pads_per_consumer": [1, 8],
                                  "seed": 42}), encoding="utf-8")
    outputs = []
    for name in ("first.csv", "second.csv"):
        assert main(["simulate", "--config", str(config), "--out", str(tmp_path / name)]) == 0
        outputs.append((tmp_path / name).read_text(encoding="utf-8"))
    assert outputs[0] == outputs[1]
    assert outputs[0].splitlines()[0] == "N,M,K,seed,mean_per_pad_ms,max_per_pad_ms,makespan_ms"
    assert len(outputs[0].splitlines()) == 5

    assert main(["simulate", "--config", str(config), "--deterministic"]) == 0
    assert capsys.readouterr().out.startswith("N,M,K,seed")


def test_bad_simulation_config_is_a_config_error(tmp_path, capsys):
    config = tmp_path / "sim.json"
    config.write_text('{"consumers": []}', encoding="utf-8")
    assert main(["simulate", "--config", str(config)]) == 2
    assert "ERROR[CONFIG_ERROR]" in capsys.readouterr().err
