"""Deterministic discrete-event core.

All simulation time is integer picoseconds. At 100 Gbps one byte serializes
in exactly 80 ps, so every protocol quantity (cell serialization, propagation,
guard bands) is an exact integer and slot arithmetic never drifts.

Events that fire at the same instant are dispatched in insertion order, which
makes a run with a fixed configuration and seed bit-reproducible.
"""

from __future__ import annotations

import heapq
from typing import Callable


class SchedulingError(RuntimeError):
    """An event was scheduled in the past; this signals a protocol-timing bug."""


def _label(obj) -> str:
    lbl = getattr(obj, "trace_label", None)
    if lbl is not None:
        return lbl
    if isinstance(obj, (int, str)):
        return repr(obj)
    return type(obj).__name__


class Simulator:
    """Single-threaded event loop over an integer picosecond clock."""

    __slots__ = ("now", "_heap", "_seq", "trace")

    def __init__(self, trace: bool = False):
        self.now: int = 0
        self._heap: list = []
        self._seq: int = 0
        # trace entries: (time_ps, sequence, entity, action) -- debug only
        self.trace: list | None = [] if trace else None

    def schedule(self, fire_time: int, fn: Callable, *args) -> None:
        if fire_time < self.now:
            name = getattr(fn, "__qualname__", repr(fn))
            raise SchedulingError(
                f"event {name} at t={fire_time} scheduled from t={self.now}"
            )
        seq = self._seq
        self._seq = seq + 1
        heapq.heappush(self._heap, (fire_time, seq, fn, args))

    def pending(self) -> int:
        return len(self._heap)

    def run_until(self, end: int) -> int:
        """Dispatch every event with fire_time <= end; returns events dispatched."""
        heap = self._heap
        trace = self.trace
        count = 0
        while heap and heap[0][0] <= end:
            t, seq, fn, args = heapq.heappop(heap)
            self.now = t
            if trace is not None:
                owner = getattr(fn, "__self__", None)
                entity = _label(owner) if owner is not None else "-"
                trace.append(
                    (t, seq, entity, fn.__name__, " ".join(_label(a) for a in args))
                )
            fn(t, *args)
            count += 1
        if self.now < end:
            self.now = end
        return count

    def run(self) -> int:
        """Dispatch until the queue is empty."""
        heap = self._heap
        trace = self.trace
        count = 0
        while heap:
            t, seq, fn, args = heapq.heappop(heap)
            self.now = t
            if trace is not None:
                owner = getattr(fn, "__self__", None)
                entity = _label(owner) if owner is not None else "-"
                trace.append(
                    (t, seq, entity, fn.__name__, " ".join(_label(a) for a in args))
                )
            fn(t, *args)
            count += 1
        return count

    def trace_lines(self):
        if self.trace is None:
            return []
        return [f"{t} {seq} {entity} {action} {args}" for t, seq, entity, action, args in self.trace]
