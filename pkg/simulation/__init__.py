from simulation.errors import EventLogViolation, InvalidSimConfig, SimulationError
from simulation.scale_sim import (
    SWEEP_COLUMNS,
    EventKind,
    LatencyModel,
    SimConfig,
    SimEvent,
    SimResult,
    SimSweepSpec,
    closed_form_per_pad_ms,
    grid,
    load_sim_spec,
    run_sweep,
    simulate,
    sweep,
    verify_event_log,
)

__all__ = [
    "SimulationError",
    "InvalidSimConfig",
    "EventLogViolation",
    "SWEEP_COLUMNS",
    "EventKind",
    "LatencyModel",
    "SimConfig",
    "SimEvent",
    "SimResult",
    "SimSweepSpec",
    "closed_form_per_pad_ms",
    "grid",
    "load_sim_spec",
    "run_sweep",
    "simulate",
    "sweep",
    "verify_event_log",
]
