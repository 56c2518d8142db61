"""Per-block retargeting from the size of the block just mined."""
from __future__ import annotations

from dataclasses import dataclass, field

from . import numerics
from .numerics import Target
from .propagation import NetworkParams, uninformed_for_size


@dataclass(frozen=True)
class DmiConfig:
    fork_limit: float = 0.0095
    hash_rate: float = 40_000_000.0
    network: NetworkParams = field(default_factory=NetworkParams)
    min_interval: float = 2.0
    max_interval: float = 3600.0

    def __post_init__(self):
        if not 0 < self.fork_limit < 1:
            raise ValueError("fork_limit must lie in (0, 1)")
        if not self.hash_rate > 0:
            raise ValueError("hash_rate must be positive")
        if self.min_interval < 2:
            raise ValueError("min_interval must be >= 2 s")
        if self.max_interval < self.min_interval:
            raise ValueError("max_interval must be >= min_interval")


@dataclass(frozen=True)
class Retarget:
    """Target for the next block plus the quantities it was derived from."""

    target: Target
    interval: float
    uninformed: float
    unclamped_interval: float

    @property
    def clamped(self) -> bool:
        return self.interval != self.unclamped_interval or self.target.clamped


def retarget(last_block_size: float, cfg: DmiConfig) -> Retarget:
    if not last_block_size > 0:
        raise ValueError("last_block_size must be positive")
    w = uninformed_for_size(last_block_size, cfg.network)
    if w > 0:
        # may round to 1 s for near-instant propagation; the clamp handles it
        raw = 1.0 / numerics._per_second_probability(cfg.fork_limit, w)
    else:
        raw = cfg.min_interval
    interval = min(max(raw, cfg.min_interval), cfg.max_interval)
    if interval == raw:
        target = numerics.target_for_fork_limit(cfg.fork_limit, w, cfg.hash_rate)
    else:
        target = numerics.target_for_interval(interval, cfg.hash_rate)
    return Retarget(target, interval, w, raw)


def next_target(last_block_size: float, cfg: DmiConfig) -> Target:
    return retarget(last_block_size, cfg).target


def implied_interval(last_block_size: float, cfg: DmiConfig) -> float:
    return retarget(last_block_size, cfg).interval
