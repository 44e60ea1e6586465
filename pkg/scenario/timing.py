# scenario/timing.py
"""Overhead breakdown tables built from PhaseRecorder samples"""
import pandas as pd

from middleware.phases import BREAKDOWN_ROWS, LOAD_ROWS, reference_ms
from utils.logging_config import PhaseRecorder

BREAKDOWN_COLUMNS = ["phase", "cold_ms", "warm_ms", "samples", "reference_cold_ms", "reference_warm_ms"]


def breakdown_table(cold: PhaseRecorder, warm: PhaseRecorder = None) -> pd.DataFrame:
    """
    One row per breakdown phase. Load rows get a cold (key fetched) and a
    warm (key cached) column; every other row is reported from cold.
    """
    rows = []
    for phase in BREAKDOWN_ROWS:
        is_load = phase in LOAD_ROWS
        rows.append({
            "phase": phase,
            "cold_ms": cold.mean(phase),
            "warm_ms": warm.mean(phase) if (warm is not None and is_load) else None,
            "samples": cold.count(phase),
            "reference_cold_ms": reference_ms(phase, "cold"),
            "reference_warm_ms": reference_ms(phase, "warm") if is_load else None,
        })
    return pd.DataFrame(rows, columns=BREAKDOWN_COLUMNS)


def format_breakdown(table: pd.DataFrame) -> str:
    return table.to_string(index=False, float_format=lambda v: f"{v:.3f}", na_rep="-")
