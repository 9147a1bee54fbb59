"""Deterministic discrete-event simulation kernel.

All timing lives in integer cycles. Nanosecond inputs are converted once,
at configuration time, via SimClock.ns_to_cycles. The event queue is a
binary heap keyed by (fire_cycle, sequence); the sequence counter breaks
ties so that two runs with the same seed and configuration replay the
exact same event order.
"""

from __future__ import annotations

import heapq
import random

DEFAULT_CYCLE_CAP = 10**10


class SimulationError(Exception):
    """Base class for simulator faults (bad config, invariant violation)."""


class CycleCapExceeded(SimulationError):
    """Livelock guard: the clock ran past the configured cycle cap."""


class SimClock:
    """Monotonic cycle counter plus the ns<->cycle scale factor."""

    __slots__ = ("now", "frequency_ghz")

    def __init__(self, frequency_ghz: float = 3.0):
        self.now = 0
        self.frequency_ghz = frequency_ghz

    def ns_to_cycles(self, ns: float) -> int:
        return round(ns * self.frequency_ghz)

    def cycles_to_ns(self, cycles: int) -> float:
        return cycles / self.frequency_ghz


class StatsAccumulator:
    """Run statistics: commit count, named counters, and the in-flight
    request integral used for MLP.

    The integral advances lazily: each delta (or explicit flush) adds
    outstanding * elapsed_cycles since the previous update, so MLP =
    integral / busy_cycles is exact under event-driven time jumps.
    """

    def __init__(self, clock: SimClock):
        self._clock = clock
        self.committed_instructions = 0
        self.inflight_integral = 0
        self.outstanding = 0
        self._last_update = 0
        self.counters: dict[str, int] = {}
        self.series: dict[str, list[tuple[int, float]]] = {}

    def record_inflight_delta(self, delta: int) -> None:
        now = self._clock.now
        if now > self._last_update:
            self.inflight_integral += self.outstanding * (now - self._last_update)
            self._last_update = now
        self.outstanding += delta
        if self.outstanding < 0:
            raise SimulationError("outstanding far-request count went negative")

    def flush_inflight(self) -> None:
        self.record_inflight_delta(0)

    def mlp(self, busy_cycles: int | None = None) -> float:
        self.flush_inflight()
        busy = self._clock.now if busy_cycles is None else busy_cycles
        if busy <= 0:
            return 0.0
        return self.inflight_integral / busy

    def bump(self, name: str, n: int = 1) -> None:
        self.counters[name] = self.counters.get(name, 0) + n

    def sample(self, name: str, value: float) -> None:
        self.series.setdefault(name, []).append((self._clock.now, value))


class Simulator:
    """Single-threaded event loop owning the clock, seeded RNG and stats.

    Independent Simulator instances share no state; one instance must
    never be driven from two threads.
    """

    def __init__(
        self,
        seed: int = 0,
        frequency_ghz: float = 3.0,
        cycle_cap: int = DEFAULT_CYCLE_CAP,
        trace_events: bool = False,
    ):
        self.clock = SimClock(frequency_ghz)
        self.rng = random.Random(seed)
        self.stats = StatsAccumulator(self.clock)
        self.cycle_cap = cycle_cap
        self.event_log: list[str] | None = [] if trace_events else None
        self.idle_hooks: list = []  # callables run when the queue drains; may reschedule
        self._heap: list = []
        self._seq = 0

    def schedule(self, delay: int, fn, label: str | None = None) -> int:
        """Register fn() to run delay cycles from now. Returns the event id."""
        if delay < 0:
            raise SimulationError(f"negative event delay {delay}")
        self._seq += 1
        heapq.heappush(self._heap, (self.clock.now + int(delay), self._seq, fn, label))
        return self._seq

    def run_until_idle(self) -> int:
        """Drain the event queue; returns the final clock value.

        Idle hooks run once the heap empties (deadlock detection, lazy
        wakeups); if a hook schedules new events the loop continues.
        """
        heap = self._heap
        clock = self.clock
        log = self.event_log
        cap = self.cycle_cap
        while True:
            while heap:
                fire, seq, fn, label = heapq.heappop(heap)
                if fire > cap:
                    raise CycleCapExceeded(
                        f"event at cycle {fire} exceeds cycle cap {cap}"
                    )
                clock.now = fire
                if log is not None:
                    log.append(f"{fire}:{seq}:{label or getattr(fn, '__qualname__', 'ev')}")
                fn()
            if not self._run_idle_hooks() or not heap:
                break
        self.stats.flush_inflight()
        return clock.now

    def _run_idle_hooks(self) -> bool:
        progressed = False
        for hook in self.idle_hooks:
            if hook():
                progressed = True
        return progressed
