"""Deterministic discrete-event core.

One Simulator owns the clock, the event heap, and the seeded RNG. All node
logic runs inside event callbacks, so identical (scenario, seed) pairs replay
bit-identically. Ties in due time fire in insertion order.
"""
from __future__ import annotations

import heapq
import itertools
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Optional


@dataclass(frozen=True)
class FiredEvent:
    time_ms: float
    label: str


@dataclass(order=True)
class _Entry:
    due: float
    seq: int
    fn: Callable[[], None] = field(compare=False)
    label: str = field(compare=False, default="")
    cancelled: bool = field(compare=False, default=False)


class EventHandle:
    """Returned by schedule calls; allows cancellation."""

    __slots__ = ("_entry",)

    def __init__(self, entry: _Entry) -> None:
        self._entry = entry

    def cancel(self) -> None:
        self._entry.cancelled = True

    @property
    def due(self) -> float:
        return self._entry.due


class Simulator:
    def __init__(self, seed: int = 0) -> None:
        self.now: float = 0.0
        self.rng = random.Random(seed)
        self._heap: list[_Entry] = []
        self._seq = itertools.count()
        self.fired: list[FiredEvent] = []
        self.trace_events = False

    def at(self, time_ms: float, fn: Callable[[], None], label: str = "") -> EventHandle:
        if time_ms < self.now:
            raise ValueError(f"cannot schedule at {time_ms} before now={self.now}")
        entry = _Entry(float(time_ms), next(self._seq), fn, label)
        heapq.heappush(self._heap, entry)
        return EventHandle(entry)

    def after(self, delay_ms: float, fn: Callable[[], None], label: str = "") -> EventHandle:
        return self.at(self.now + delay_ms, fn, label)

    def every(
        self,
        period_ms: float,
        fn: Callable[[], None],
        start_ms: Optional[float] = None,
        label: str = "",
    ) -> Callable[[], None]:
        """Schedule fn periodically; returns a stop function."""
        stopped = {"flag": False}

        def tick() -> None:
            if stopped["flag"]:
                return
            fn()
            if not stopped["flag"]:
                self.after(period_ms, tick, label)

        self.at(self.now if start_ms is None else start_ms, tick, label)

        def stop() -> None:
            stopped["flag"] = True

        return stop

    def advance(self, until_ms: float) -> list[FiredEvent]:
        """Run all events due at or before until_ms; clock ends at until_ms."""
        if until_ms < self.now:
            raise ValueError(f"cannot advance to {until_ms} before now={self.now}")
        fired: list[FiredEvent] = []
        while self._heap and self._heap[0].due <= until_ms:
            entry = heapq.heappop(self._heap)
            if entry.cancelled:
                continue
            self.now = entry.due
            if self.trace_events:
                ev = FiredEvent(entry.due, entry.label)
                fired.append(ev)
                self.fired.append(ev)
            entry.fn()
        self.now = until_ms
        return fired

    def run_until_idle(self, limit_ms: float) -> None:
        """Advance until no events remain or the limit is reached."""
        while self._heap and self._heap[0].due <= limit_ms:
            self.advance(self._heap[0].due)
        self.now = max(self.now, limit_ms)

    @property
    def pending(self) -> int:
        return sum(1 for e in self._heap if not e.cancelled)

    def now_int(self) -> int:
        """Integer-millisecond timestamp for message stamping."""
        return int(self.now)

    def uniform(self, a: float, b: float) -> float:
        return self.rng.uniform(a, b)

    def chance(self, p: float) -> bool:
        """Bernoulli draw from the owned stream."""
        if p <= 0.0:
            return False
        if p >= 1.0:
            return True
        return self.rng.random() < p


AnyCallback = Callable[..., Any]
