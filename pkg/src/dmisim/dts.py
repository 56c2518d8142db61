"""Block assembly: fee-weighted Merkle leaf allocation (DTS) and baselines.

All assemblers take the candidate view as arrays in arrival order and return
an :class:`Assembly` whose ``selected`` holds positions into that view.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

HEADER_BYTES = 1000


@dataclass(frozen=True)
class DtsConfig:
    scale: float = 6.8
    shape: float = 1.0
    max_space_per_tx: int = 80
    leaf_capacity: int = 2048
    priority: str = "time_based"
    designated_small_space: bool = False

    def __post_init__(self):
        if not (self.scale > 0 and self.shape > 0):
            raise ValueError("scale and shape must be positive")
        L = self.leaf_capacity
        if L < 1 or L & (L - 1):
            raise ValueError("leaf_capacity must be a power of two")
        if not 1 <= self.max_space_per_tx <= L:
            raise ValueError("max_space_per_tx must lie in [1, leaf_capacity]")
        if self.priority != "time_based":
            raise ValueError("only time_based priority is supported")
        if self.designated_small_space:
            raise ValueError("designated_small_space is not supported")


@dataclass(frozen=True)
class Assembly:
    selected: np.ndarray
    leaf_usage: int
    block_size: int
    total_fees: float

    @property
    def count(self) -> int:
        return len(self.selected)


def fee_cdf(fee, cfg: DtsConfig):
    """Weibull CDF with the configured scale and shape."""
    fee = np.asarray(fee, dtype=float)
    return -np.expm1(-np.power(fee / cfg.scale, cfg.shape))


def leaves_for_fee(fee, cfg: DtsConfig):
    """Merkle leaves a transaction occupies; vectorised over ``fee``."""
    fee = np.asarray(fee, dtype=float)
    if np.any(fee < 0):
        raise ValueError("fees must be non-negative")
    raw = np.ceil(fee_cdf(fee, cfg) * cfg.max_space_per_tx)
    leaves = np.clip(raw, 1, cfg.max_space_per_tx).astype(np.int64)
    return int(leaves) if leaves.ndim == 0 else leaves


def _fees_of(view) -> np.ndarray:
    if isinstance(view, np.ndarray):
        return view.astype(float, copy=False)
    return np.fromiter((tx.fee for tx in view), dtype=float)


def assemble_dts_block(fees, cfg: DtsConfig, tx_size: int = 500, *,
                       max_txs: int | None = None, header_bytes: int = HEADER_BYTES) -> Assembly:
    """Take arrival-ordered transactions until the next one no longer fits.

    ``fees`` may be an array or a sequence of objects with a ``fee``
    attribute. ``max_txs`` applies the byte cap of the block, if any.
    """
    fees = _fees_of(fees)
    if max_txs is not None:
        fees = fees[:max_txs]
    if len(fees) == 0:
        return Assembly(np.empty(0, dtype=np.int64), 0, header_bytes, 0.0)
    used = np.cumsum(leaves_for_fee(fees, cfg))
    n = int(np.searchsorted(used, cfg.leaf_capacity, side="right"))
    selected = np.arange(n, dtype=np.int64)
    leaf_usage = int(used[n - 1]) if n else 0
    return Assembly(selected, leaf_usage, n * tx_size + header_bytes, math.fsum(fees[:n]))


def assemble_standard_block(fees, max_block_bytes: int = 1_000_000, tx_size: int = 500, *,
                            header_bytes: int = HEADER_BYTES) -> Assembly:
    """Fill the block in arrival order up to ``max_block_bytes // tx_size``."""
    fees = _fees_of(fees)
    n = min(len(fees), max_block_bytes // tx_size)
    return Assembly(np.arange(n, dtype=np.int64), 0, n * tx_size + header_bytes,
                    math.fsum(fees[:n]))


def assemble_fee_priority_block(fees, max_block_bytes: int = 1_000_000, tx_size: int = 500, *,
                                header_bytes: int = HEADER_BYTES) -> Assembly:
    """Greedy highest-fee-first fill; ties go to the earlier arrival."""
    fees = _fees_of(fees)
    n = min(len(fees), max_block_bytes // tx_size)
    if n == 0:
        return Assembly(np.empty(0, dtype=np.int64), 0, header_bytes, 0.0)
    if n == len(fees):
        selected = np.arange(n, dtype=np.int64)
    else:
        cutoff = np.partition(fees, len(fees) - n)[len(fees) - n]
        above = np.flatnonzero(fees > cutoff)
        ties = np.flatnonzero(fees == cutoff)[: n - len(above)]
        selected = np.sort(np.concatenate([above, ties]))
    return Assembly(selected, 0, n * tx_size + header_bytes, math.fsum(fees[selected]))
