"""Conversions between target, difficulty, expected interval and fork rate.

Targets are kept as exact 256-bit integers for header encoding. Every
analytic quantity (difficulty, interval, per-second find probability) is a
float computed with ``log1p``/``expm1`` so that small fork rates and long
intervals keep full double precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

HASH_SPACE = 1 << 256
MAX_TARGET = HASH_SPACE - 1


class DomainError(ValueError):
    """An argument lies outside the domain of a conversion."""


@dataclass(frozen=True)
class Target:
    """Hash threshold a block must beat.

    ``clamped`` is set when the requested target reached 2**256 and had to be
    pulled back to the largest encodable value.
    """

    value: int
    clamped: bool = False

    def __post_init__(self):
        if not 0 < self.value <= MAX_TARGET:
            raise DomainError(f"target out of range: {self.value}")

    @property
    def probability(self) -> float:
        """Chance that a single hash evaluation falls below the target."""
        return self.value / HASH_SPACE

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(32, "big")

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Target":
        if len(raw) != 32:
            raise DomainError(f"target header field must be 32 bytes, got {len(raw)}")
        return cls(int.from_bytes(raw, "big"))

    def hex(self) -> str:
        return f"{self.value:064x}"


def _target_from_ratio(ratio: Fraction | float) -> Target:
    # ratio is T / 2**256
    value = int(Fraction(ratio) * HASH_SPACE)
    if value <= 0:
        raise DomainError("target underflows to zero")
    if value > MAX_TARGET:
        return Target(MAX_TARGET, clamped=True)
    return Target(value)


def difficulty_from_target(t: Target | int) -> float:
    value = t.value if isinstance(t, Target) else t
    if value <= 0:
        raise DomainError("target must be positive")
    return HASH_SPACE / value


def target_from_difficulty(d: float) -> Target:
    if not d >= 1.0 or math.isinf(d):
        raise DomainError(f"difficulty must be a finite value >= 1, got {d}")
    return _target_from_ratio(1 / Fraction(d))


def expected_interval(d: float, hash_rate: float) -> float:
    """Mean time to the next block, in seconds."""
    if not hash_rate > 0:
        raise DomainError("hash rate must be positive")
    if not d >= 1.0:
        raise DomainError("difficulty must be >= 1")
    return d / hash_rate


def fork_rate_from_interval(interval: float, uninformed: float) -> float:
    """Estimated fork probability for a block mined ``interval`` seconds apart.

    ``uninformed`` is the integral of (1 - f(t)) over the block's
    propagation, in seconds.
    """
    if not interval > 1.0:
        raise DomainError(f"interval must exceed 1 s, got {interval}")
    if uninformed < 0:
        raise DomainError("uninformed integral must be non-negative")
    return -math.expm1(uninformed * math.log1p(-1.0 / interval))


def _per_second_probability(fork_limit: float, uninformed: float) -> float:
    if not 0.0 < fork_limit < 1.0:
        raise DomainError(f"fork limit must lie in (0, 1), got {fork_limit}")
    if not uninformed > 0:
        raise DomainError("uninformed integral must be positive; any interval satisfies w = 0")
    return -math.expm1(math.log1p(-fork_limit) / uninformed)


def interval_for_fork_limit(fork_limit: float, uninformed: float) -> float:
    """Shortest expected interval that keeps the fork estimate at ``fork_limit``."""
    p = _per_second_probability(fork_limit, uninformed)
    if p >= 1.0:
        raise DomainError("fork limit is unreachable: per-second probability >= 1")
    return 1.0 / p


def target_for_fork_limit(fork_limit: float, uninformed: float, hash_rate: float) -> Target:
    """Closed form target for a fork budget, block propagation and hash rate.

    A target at or above 2**256 is clamped and flagged on the result.
    """
    if not hash_rate > 0:
        raise DomainError("hash rate must be positive")
    p = _per_second_probability(fork_limit, uninformed)
    return _target_from_ratio(Fraction(p) / Fraction(hash_rate))


def target_for_interval(interval: float, hash_rate: float) -> Target:
    """Target whose expected interval at ``hash_rate`` equals ``interval``."""
    if not interval > 0:
        raise DomainError("interval must be positive")
    d = interval * hash_rate
    if d < 1.0:
        return Target(MAX_TARGET, clamped=True)
    return target_from_difficulty(d)


def interval_from_target(t: Target | int, hash_rate: float) -> float:
    return expected_interval(difficulty_from_target(t), hash_rate)
