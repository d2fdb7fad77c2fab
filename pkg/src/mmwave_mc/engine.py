"""Deterministic discrete-event engine and labeled RNG substreams.

Single-threaded event loop; (fire_time, sequence_no) gives a total order, so
replaying a run with the same master seed and config is byte-identical.
Substreams are derived by hashing (master_seed, label) into independent PCG64
states: adding a node never perturbs another node's randomness.
"""

from __future__ import annotations

import hashlib
import heapq
from typing import Callable, NamedTuple

import numpy as np

from .errors import ConfigError, SimAbort


class Event(NamedTuple):
    fire_time: float        # simulated seconds
    sequence_no: int        # monotone tie-break counter
    tag: str                # short label for diagnostics
    action: Callable[[], None]


class Engine:
    """Event loop with a stable FIFO tie-break among equal fire times."""

    def __init__(self) -> None:
        self.now = 0.0
        self._heap: list[Event] = []
        self._seq = 0
        self.processed = 0

    def schedule(self, delay: float, action: Callable[[], None], tag: str = "") -> int:
        if delay < 0:
            raise ConfigError(f"negative delay {delay!r} (tag={tag!r})")
        ev = Event(self.now + delay, self._seq, tag, action)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        return ev.sequence_no

    def run_until(self, t_end: float) -> int:
        """Process every event with fire_time <= t_end; clock ends at t_end."""
        if t_end < self.now:
            raise ConfigError(f"run_until({t_end}) is before current time {self.now}")
        heap = self._heap
        done = 0
        while heap and heap[0].fire_time <= t_end:
            ev = heapq.heappop(heap)
            self.now = ev.fire_time
            try:
                ev.action()
            except Exception as exc:
                raise SimAbort(
                    f"event handler failed at t={ev.fire_time:.9f}s tag={ev.tag!r}: {exc}"
                ) from exc
            done += 1
        self.now = t_end
        self.processed += done
        return done


class RngStream:
    """Counted wrapper over one numpy Generator; identical (label, seed) pairs
    yield identical draw sequences across runs and platforms."""

    __slots__ = ("label", "seed", "draw_count", "gen")

    def __init__(self, label: str, seed: int):
        if not label:
            raise ConfigError("rng stream label must be non-empty")
        digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
        self.label = label
        self.seed = seed
        self.draw_count = 0
        self.gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(int.from_bytes(digest[:16], "big")))
        )

    def random(self) -> float:
        self.draw_count += 1
        return float(self.gen.random())

    def random_block(self, n: int) -> np.ndarray:
        self.draw_count += n
        return self.gen.random(n)

    def uniform(self, low: float, high: float) -> float:
        self.draw_count += 1
        return float(self.gen.uniform(low, high))

    def normal(self, mean: float, sigma: float) -> float:
        self.draw_count += 1
        return float(self.gen.normal(mean, sigma))

    def standard_normal(self, n: int) -> np.ndarray:
        self.draw_count += n
        return self.gen.standard_normal(n)


def rng_stream(label: str, master_seed: int) -> RngStream:
    """Derive an independent, reproducible substream for (label, master_seed)."""
    return RngStream(label, master_seed)
