import io
import logging

import pytest

from utils.logging_config import LogExecutionTime, PhaseRecorder, log_policy_decision, setup_logging


@pytest.fixture
def restore_logging():
    root = logging.getLogger()
    saved = root.handlers[:], root.level
    audit = logging.getLogger("audit")
    saved_audit = audit.handlers[:], audit.propagate
    yield
    for handler in root.handlers[:] + audit.handlers[:]:
        handler.close()
    root.handlers[:], root.level = saved
    audit.handlers[:], audit.propagate = saved_audit


def test_phase_recorder_collects_successful_blocks():
    recorder = PhaseRecorder()
    for _ in range(3):
        with LogExecutionTime("load.decrypt", __name__, recorder) as timer:
            pass
        assert timer.duration_ms >= 0
    with pytest.raises(ValueError):
        with LogExecutionTime("load.decrypt", __name__, recorder):
            raise ValueError("bad tag")

    assert recorder.count("load.decrypt") == 3
    assert recorder.mean("load.decrypt") == pytest.approx(sum(recorder.samples("load.decrypt")) / 3)
    assert recorder.mean("load.fetch_key") is None
    assert recorder.phases() == ["load.decrypt"]


def test_files_and_audit_log(tmp_path, restore_logging):
    console = io.StringIO()
    log_path = setup_logging("pad_test", "INFO", str(tmp_path), console_stream=console)
    logging.getLogger("pad.codec").warning("suite 0x0002 selected")
    log_policy_decision("training", "input", False, "share 66.7% > cap 60%")
    for handler in logging.getLogger().handlers + logging.getLogger("audit").handlers:
        handler.flush()

    assert log_path == tmp_path
    assert "suite 0x0002 selected" in (tmp_path / "pad_test.log").read_text(encoding="utf-8")
    audit = (tmp_path / "pad_test-audit.log").read_text(encoding="utf-8")
    assert "Engine: training | Phase: input | Verdict: DENY | share 66.7% > cap 60%" in audit
    # policy decisions stay out of the console
    assert "Verdict" not in console.getvalue()
    assert "suite 0x0002 selected" in console.getvalue()


def test_console_only_without_directory(restore_logging):
    console = io.StringIO()
    assert setup_logging("pad_test", "WARNING", None, console_stream=console) is None
    # without files, policy decisions reach the root handlers
    assert logging.getLogger("audit").propagate
    logging.getLogger("delegator.server").info("quiet")
    logging.getLogger("delegator.server").warning("loud")
    assert "quiet" not in console.getvalue()
    assert "loud" in console.getvalue()
