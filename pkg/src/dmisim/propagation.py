"""Expected-value wave model of block dissemination.

A block spreads in waves spaced ``TP_avg = size / bandwidth + delay`` apart.
Nodes informed in one wave each push the block to ``m`` distinct random
peers in the next wave; different senders choose independently, so a node
may be hit more than once. The informed-nodes rate ``f(t)`` is the step
function of the expected informed count after each wave.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

EPS_STOP = 1e-9

# the wave counts do not depend on block size, only on (N, m, model)
_cache_lock = threading.Lock()


@dataclass(frozen=True)
class NetworkParams:
    node_count: int = 10_000
    neighbor_degree: int = 8
    bandwidth: float = 820_000.0  # bytes per second
    delay: float = 0.0  # seconds per hop

    def __post_init__(self):
        if self.node_count < 2:
            raise ValueError("node_count must be >= 2")
        if not 1 <= self.neighbor_degree < self.node_count:
            raise ValueError("neighbor_degree must satisfy 1 <= m < N")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if self.delay < 0:
            raise ValueError("delay must be non-negative")


@dataclass(frozen=True)
class InformedCurve:
    wave_interval: float
    informed_counts: tuple[float, ...]
    node_count: int

    @property
    def waves(self) -> int:
        """Number of waves until every node holds the block."""
        return len(self.informed_counts) - 1

    @property
    def duration(self) -> float:
        return self.waves * self.wave_interval

    def fractions(self) -> np.ndarray:
        return np.asarray(self.informed_counts) / self.node_count

    def __call__(self, t: float) -> float:
        """Informed-nodes rate f(t) for t >= 0 seconds after discovery."""
        if t < 0:
            raise ValueError("t must be non-negative")
        if self.wave_interval == 0 or t >= self.duration:
            return 1.0
        return self.informed_counts[int(t // self.wave_interval)] / self.node_count


def pairwise_propagation_interval(block_size: float, p: NetworkParams) -> float:
    if block_size < 0:
        raise ValueError("block_size must be non-negative")
    return block_size / p.bandwidth + p.delay


def _linear_waves(n: int, m: int) -> tuple[float, ...]:
    # first-order recurrence: each push lands on an uninformed node with
    # probability (N - informed) / N and collisions are ignored
    informed = [1.0]
    senders, p_next = 1.0, 1.0
    while True:
        new = senders * m * p_next
        current = min(informed[-1] + new, float(n))
        informed.append(current)
        senders, p_next = new, (n - current) / n
        if n - current < EPS_STOP * n or new < 1.0:
            informed[-1] = float(n)
            return tuple(informed)


def _collision_waves(n: int, m: int) -> tuple[float, ...]:
    # each uninformed node escapes one sender with probability 1 - m/(N-1)
    informed = [1.0]
    senders = 1.0
    q = m / (n - 1)
    log_escape = math.log1p(-q) if q < 1 else -math.inf
    while True:
        uninformed = n - informed[-1]
        new = uninformed if math.isinf(log_escape) else -uninformed * math.expm1(senders * log_escape)
        current = min(informed[-1] + new, float(n))
        informed.append(current)
        senders = new
        # the push process can die out with a few nodes never reached; once a
        # wave reaches less than one node they are swept up in that wave, so
        # there are at most N waves
        if n - current < EPS_STOP * n or new < 1.0:
            informed[-1] = float(n)
            return tuple(informed)


@lru_cache(maxsize=256)
def wave_counts(node_count: int, neighbor_degree: int, model: str = "collision") -> tuple[float, ...]:
    """Expected cumulative informed count after each wave, starting at 1."""
    if model == "collision":
        return _collision_waves(node_count, neighbor_degree)
    if model == "linear":
        return _linear_waves(node_count, neighbor_degree)
    raise ValueError(f"unknown propagation model {model!r}")


def informed_curve(block_size: float, p: NetworkParams, model: str = "collision") -> InformedCurve:
    with _cache_lock:
        counts = wave_counts(p.node_count, p.neighbor_degree, model)
    return InformedCurve(pairwise_propagation_interval(block_size, p), counts, p.node_count)


def uninformed_integral(c: InformedCurve) -> float:
    """Exact integral of 1 - f(t) over the step function, in seconds."""
    counts = c.informed_counts
    return c.wave_interval * math.fsum(1.0 - k / c.node_count for k in counts)


def uninformed_for_size(block_size: float, p: NetworkParams, model: str = "collision") -> float:
    return uninformed_integral(informed_curve(block_size, p, model))


def curve_table(c: InformedCurve) -> list[tuple[float, float]]:
    """(t, f) breakpoints of the step function, one per wave."""
    return [(k * c.wave_interval, n / c.node_count) for k, n in enumerate(c.informed_counts)]
