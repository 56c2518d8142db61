"""Benchmark quantities derived from a finished run."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np

from .engine import SimResult

TIMELINE_COLUMNS = ("block_time_min", "block_size_bytes", "cumulative_tps", "instant_tps")
BLOCK_COLUMNS = ("height", "time", "size", "interval", "target_hex", "stale", "tx_count", "fees",
                 "id", "parent_id")
INSTANT_WINDOW = 3600.0


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class MetricsReport:
    tps: float
    fork_rate: float
    canonical_blocks: int  # excluding genesis
    stale_blocks: int
    mean_interval: float
    mean_block_fill: float
    fee_cv: float | None  # over canonical non-empty blocks
    makespan: float | None
    confirmed: int
    elapsed: float

    def to_dict(self) -> dict:
        return asdict(self)


def _makespan(r: SimResult, chain) -> float | None:
    if not r.drained:
        return None
    times = [b.time for b in chain if b.tx_count]
    return times[-1] if times else None


def report(r: SimResult) -> MetricsReport:
    chain = r.canonical[1:]
    stale = sum(1 for b in r.blocks if b.stale)
    makespan = _makespan(r, chain)
    elapsed = makespan if makespan is not None else r.duration
    if not elapsed > 0:
        raise MetricsError("run has zero elapsed time; throughput is undefined")
    mined = stale + len(chain)
    fork_rate = stale / mined if mined else 0.0
    s = r.scenario
    if chain:
        fill = float(np.mean([b.tx_count * s.workload.tx_size / s.max_block_bytes for b in chain]))
        mean_interval = chain[-1].time / len(chain)
    else:
        fill, mean_interval = 0.0, math.nan
    fees = np.array([b.total_fees for b in chain if b.tx_count])
    fee_cv = float(fees.std() / fees.mean()) if len(fees) > 1 and fees.mean() > 0 else None
    return MetricsReport(tps=r.confirmed / elapsed, fork_rate=fork_rate,
                         canonical_blocks=len(chain), stale_blocks=stale,
                         mean_interval=mean_interval, mean_block_fill=min(fill, 1.0),
                         fee_cv=fee_cv, makespan=makespan, confirmed=r.confirmed, elapsed=elapsed)


def fork_rate_stderr(rate: float, blocks: int) -> float:
    """Binomial standard error of a fork-rate estimate over ``blocks`` trials."""
    return math.sqrt(rate * (1 - rate) / blocks)


def timeline_rows(r: SimResult) -> list[tuple]:
    """One row per block in time order; throughput counts canonical blocks only."""
    blocks = sorted(r.blocks[1:], key=lambda b: (b.time, b.id)) if r.blocks else []
    canon = {b.id for b in r.canonical} if r.blocks else set()
    times = np.array([b.time for b in blocks])
    txs = np.array([b.tx_count if b.id in canon else 0 for b in blocks], dtype=np.int64)
    cum = np.cumsum(txs)
    rows = []
    for i, b in enumerate(blocks):
        lo = int(np.searchsorted(times, b.time - INSTANT_WINDOW, side="right"))
        in_window = cum[i] - (cum[lo - 1] if lo else 0)
        rows.append((b.time / 60.0, b.size, cum[i] / b.time, in_window / INSTANT_WINDOW))
    return rows


def _write_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def timeline_csv(r: SimResult) -> str:
    rows = [(repr(float(t)), int(size), repr(float(c)), repr(float(i)))
            for t, size, c, i in timeline_rows(r)]
    return _write_csv(TIMELINE_COLUMNS, rows)


def blocks_csv(r: SimResult) -> str:
    rows = [(b.height, repr(b.time), b.size, repr(b.interval), b.target.hex(), int(b.stale),
             b.tx_count, repr(float(b.total_fees)), b.id,
             "" if b.parent_id is None else b.parent_id) for b in r.blocks]
    return _write_csv(BLOCK_COLUMNS, rows)


def audit_dict(r: SimResult) -> dict:
    return {"confirmed": r.confirmed, "returned_pending": r.returned_pending,
            "fresh_pending": r.fresh_pending, "generated": r.generated,
            "initial_backlog": r.initial_backlog, "balanced": r.audit()}
