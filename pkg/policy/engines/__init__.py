from policy.engines.base import OutputProposal, PolicyEngine
from policy.engines.registry import EngineRegistry, default_registry

__all__ = ["PolicyEngine", "OutputProposal", "EngineRegistry", "default_registry"]
