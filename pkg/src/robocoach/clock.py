"""Virtual time source and cancellable timer queue.

All session timing runs on integer virtual milliseconds.  Time advances
only when the engine processes the next due entry, which makes fast-mode
replays deterministic and lets realtime mode map the same timeline onto
the wall clock.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field


class VirtualClock:
    def __init__(self, start_ms: int = 0):
        self.now_ms = start_ms

    def advance_to(self, t_ms: int) -> None:
        if t_ms < self.now_ms:
            raise ValueError(f"clock cannot go backwards: {t_ms} < {self.now_ms}")
        self.now_ms = t_ms


@dataclass(order=True)
class Timer:
    due_ms: int
    priority: int
    seq: int
    payload: object = field(compare=False)
    cancelled: bool = field(default=False, compare=False)

    def cancel(self) -> None:
        self.cancelled = True

    @property
    def active(self) -> bool:
        return not self.cancelled


class Scheduler:
    """Min-heap of timers.

    Ties break on (priority, scheduling order).  External inputs use a
    higher priority number than internal timers so that an input landing
    on the same millisecond as e.g. a repetition timer orders the same
    way whether it was queued live or replayed from a script.
    """

    def __init__(self):
        self._heap: list[Timer] = []
        self._seq = 0

    def at(self, due_ms: int, payload: object, priority: int = 0) -> Timer:
        timer = Timer(due_ms=due_ms, priority=priority, seq=self._seq, payload=payload)
        self._seq += 1
        heapq.heappush(self._heap, timer)
        return timer

    def _drop_cancelled(self) -> None:
        while self._heap and self._heap[0].cancelled:
            heapq.heappop(self._heap)

    def next_due(self) -> int | None:
        self._drop_cancelled()
        return self._heap[0].due_ms if self._heap else None

    def pop_next(self) -> Timer | None:
        self._drop_cancelled()
        return heapq.heappop(self._heap) if self._heap else None

    def __len__(self) -> int:
        return sum(1 for t in self._heap if t.active)
