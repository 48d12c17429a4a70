"""Training/evaluation metrics: streaming trailing-window success rate."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field


@dataclass
class MetricsSeries:
    """Per-episode success flags with a trailing-window running rate.

    Partial windows average over the episodes seen so far, matching the
    published running-success curves.
    """
    window: int = 1000
    flags: list[bool] = field(default_factory=list)
    _tail: deque = field(default_factory=deque)
    _tail_sum: int = 0

    def add(self, success: bool) -> float:
        self.flags.append(bool(success))
        self._tail.append(bool(success))
        self._tail_sum += int(success)
        if len(self._tail) > self.window:
            self._tail_sum -= int(self._tail.popleft())
        return self.running_rate()

    def running_rate(self) -> float:
        if not self._tail:
            return 0.0
        return self._tail_sum / len(self._tail)

    def naive_running_rate(self, index: int | None = None) -> float:
        """Recompute the trailing rate from scratch (oracle for tests)."""
        flags = self.flags if index is None else self.flags[: index + 1]
        if not flags:
            return 0.0
        tail = flags[-self.window:]
        return sum(tail) / len(tail)

    def __len__(self) -> int:
        return len(self.flags)
