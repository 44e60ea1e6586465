# policy/engines/registry.py
import logging
import threading
import uuid
from typing import Callable, Dict, List, Optional

from policy.engines.base import PolicyEngine
from policy.errors import DuplicateEngine
from utils.common_utils import coerce_uuid

logger = logging.getLogger(__name__)


class EngineRegistry:
    """Policy engines keyed by the policy language UUID they implement"""

    def __init__(self):
        self._engines: Dict[uuid.UUID, PolicyEngine] = {}
        self._lock = threading.Lock()

    def register_engine(self, policy_lang_id, engine: PolicyEngine):
        lang_id = coerce_uuid(policy_lang_id)
        with self._lock:
            if lang_id in self._engines:
                raise DuplicateEngine(f"an engine is already registered for policy language {lang_id}")
            self._engines[lang_id] = engine
        logger.info(f"Registered policy engine {engine.name} for {lang_id}")

    def get(self, policy_lang_id) -> Optional[PolicyEngine]:
        return self._engines.get(coerce_uuid(policy_lang_id))

    def __contains__(self, policy_lang_id) -> bool:
        return coerce_uuid(policy_lang_id) in self._engines

    def language_ids(self) -> List[uuid.UUID]:
        return list(self._engines)


def default_registry(clock: Callable[[], float] = None) -> EngineRegistry:
    """Registry with the training-data and model-data engines"""
    from policy.engines.model_engine import ModelPolicyEngine
    from policy.engines.training_engine import TrainingPolicyEngine

    registry = EngineRegistry()
    training = TrainingPolicyEngine()
    model = ModelPolicyEngine(clock=clock)
    registry.register_engine(training.policy_lang_id, training)
    registry.register_engine(model.policy_lang_id, model)
    return registry
