from scenario.bench import run_bench
from scenario.deployment import LoopbackDeployment
from scenario.hospital import ScenarioReport, ScenarioSpec, default_spec, load_scenario_spec, run_hospital_scenario

__all__ = [
    "LoopbackDeployment",
    "ScenarioSpec",
    "ScenarioReport",
    "default_spec",
    "load_scenario_spec",
    "run_hospital_scenario",
    "run_bench",
]
