# policy/rate_limiter.py
"""
Fixed-window query counters used by the model-data policy engine.

Windows are one minute long and aligned to wall-clock minutes. Counts are
attempts: the increment that causes a denial is kept, so a denied query still
counts inside its window. State is volatile and lives per model PAD; PADs
whose window has passed are dropped when a newer window opens.
"""
import logging
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Tuple

logger = logging.getLogger(__name__)

WINDOW_SECONDS = 60


def window_start_of(now: float, window_seconds: int = WINDOW_SECONDS) -> float:
    return (now // window_seconds) * window_seconds


@dataclass
class RateLimiterState:
    """Query counts of one model PAD in the current window"""
    window_start: float = 0.0
    counts: Dict[uuid.UUID, int] = field(default_factory=dict)

    def roll(self, now: float, window_seconds: int = WINDOW_SECONDS):
        start = window_start_of(now, window_seconds)
        if start != self.window_start:
            self.window_start = start
            self.counts.clear()

    def count(self, owner: uuid.UUID) -> int:
        return self.counts.get(owner, 0)


class QueryRateLimiter:
    """Atomic check-and-increment over per-PAD, per-owner windows"""

    def __init__(self, clock: Callable[[], float] = None, window_seconds: int = WINDOW_SECONDS):
        self._clock = clock or time.time
        self._window_seconds = window_seconds
        self._states: Dict[uuid.UUID, RateLimiterState] = {}
        self._latest_window = float("-inf")
        self._lock = threading.Lock()

    def now(self) -> float:
        return self._clock()

    def admit(self, data_id: uuid.UUID, owner: uuid.UUID, limits: Iterable[int],
              now: float = None) -> Tuple[bool, int]:
        """
        Count one query by owner against the PAD data_id.

        Returns (admitted, count after increment). The query is admitted when
        the new count is within every limit.
        """
        limits = list(limits)
        if now is None:
            now = self._clock()
        start = window_start_of(now, self._window_seconds)
        with self._lock:
            if start > self._latest_window:
                self._evict_before(start)
                self._latest_window = start
            state = self._states.setdefault(data_id, RateLimiterState(start))
            state.roll(now, self._window_seconds)
            count = state.counts.get(owner, 0) + 1
            state.counts[owner] = count
        admitted = all(count <= limit for limit in limits)
        if not admitted:
            logger.info(f"Rate limit reached for owner {owner} on {data_id}: {count} > {min(limits)}/min")
        return admitted, count

    def _evict_before(self, start: float):
        # windows older than the current one can no longer deny anything
        stale = [data_id for data_id, state in self._states.items() if state.window_start < start]
        for data_id in stale:
            del self._states[data_id]

    def tracked_pads(self) -> int:
        with self._lock:
            return len(self._states)

    def state_of(self, data_id: uuid.UUID) -> RateLimiterState:
        with self._lock:
            state = self._states.get(data_id)
            if state is None:
                return RateLimiterState()
            return RateLimiterState(state.window_start, dict(state.counts))

    def reset(self):
        with self._lock:
            self._states.clear()
            self._latest_window = float("-inf")
