"""Transaction streams and the pending-transaction pool.

Transaction ids are assigned in arrival order: the initial backlog first
(all arriving at t = 0), then the generated stream. Because of that, "FIFO
by arrival time, ties by id" is simply ascending id order.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

HOURS = 24
DEFAULT_TX_SIZE = 500

# quoted hourly volumes; the other 18 hours are linearly interpolated
PROFILE_ANCHORS = {0: 530, 9: 25_842, 10: 33_973, 15: 24_271, 16: 35_764, 23: 741}


class ProfileError(ValueError):
    pass


class FeeReplayWrapped(UserWarning):
    """A replayed fee file ran out and was restarted from its first row."""


@dataclass(frozen=True)
class Transaction:
    id: int
    arrival_time: float
    size: int = DEFAULT_TX_SIZE
    fee: float = 0.0

    def __post_init__(self):
        if self.size <= 0 or self.fee < 0 or self.arrival_time < 0:
            raise ValueError(f"invalid transaction {self}")


@dataclass(frozen=True)
class HourlyProfile:
    volumes: tuple[int, ...]

    def __post_init__(self):
        if len(self.volumes) != HOURS:
            raise ProfileError(f"profile needs {HOURS} hourly volumes, got {len(self.volumes)}")
        if any(v < 0 for v in self.volumes):
            raise ProfileError("hourly volumes must be non-negative")

    @property
    def total(self) -> int:
        return sum(self.volumes)

    def scaled(self, factor: float) -> "HourlyProfile":
        return HourlyProfile(tuple(int(round(v * factor)) for v in self.volumes))


def interpolated_profile(anchors: dict[int, int] = PROFILE_ANCHORS) -> HourlyProfile:
    hours = sorted(anchors)
    values = np.interp(np.arange(HOURS), hours, [anchors[h] for h in hours])
    return HourlyProfile(tuple(int(round(v)) for v in values))


def load_profile(path: str | Path | None = None) -> HourlyProfile:
    """Read an ``hour,count`` CSV; ``None`` loads the bundled default."""
    if path is None:
        text = resources.files("dmisim").joinpath("data/icbc_profile.csv").read_text()
        name = "<bundled profile>"
    else:
        text = Path(path).read_text()
        name = str(path)
    volumes: dict[int, int] = {}
    lineno = 0
    for lineno, row in enumerate(csv.reader(text.splitlines()), start=1):
        if not row or not "".join(row).strip():
            continue
        if lineno == 1 and not row[0].strip().lstrip("-").isdigit():
            continue  # header
        if len(row) != 2:
            raise ProfileError(f"{name}:{lineno}: expected 'hour,count'")
        try:
            hour, count = int(row[0]), int(row[1])
        except ValueError:
            raise ProfileError(f"{name}:{lineno}: non-integer field") from None
        if not 0 <= hour < HOURS:
            raise ProfileError(f"{name}:{lineno}: hour {hour} out of range")
        if count < 0:
            raise ProfileError(f"{name}:{lineno}: negative count {count}")
        if hour in volumes:
            raise ProfileError(f"{name}:{lineno}: duplicate hour {hour}")
        volumes[hour] = count
    if len(volumes) != HOURS:
        raise ProfileError(f"{name}:{lineno}: expected {HOURS} rows, got {len(volumes)}")
    return HourlyProfile(tuple(volumes[h] for h in range(HOURS)))


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def generate_arrivals(profile: HourlyProfile, seed, days: int = 1) -> np.ndarray:
    """Piecewise-constant Poisson arrival times (seconds), sorted."""
    rng = _rng(seed)
    out = []
    for day in range(days):
        for hour, volume in enumerate(profile.volumes):
            if volume == 0:
                continue
            start = (day * HOURS + hour) * 3600.0
            mean_gap = 3600.0 / volume
            times = []
            elapsed = 0.0
            while True:
                n = int(volume + 6 * math.sqrt(volume) + 16)
                t = elapsed + np.cumsum(rng.exponential(mean_gap, n))
                inside = t[t < 3600.0]
                times.append(inside)
                if len(inside) < n:
                    break
                elapsed = t[-1]
            out.append(start + np.concatenate(times))
    return np.concatenate(out) if out else np.empty(0)


@dataclass(frozen=True)
class FeeDist:
    kind: str = "constant"
    value: float = 1.0
    mu: float = 0.0
    sigma: float = 1.0
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "lognormal", "csv_replay"):
            raise ValueError(f"unknown fee distribution {self.kind!r}")
        if self.kind == "constant" and self.value < 0:
            raise ValueError("constant fee must be non-negative")
        if self.kind == "lognormal" and self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.kind == "csv_replay" and not self.path:
            raise ValueError("csv_replay needs a path")


def read_fee_csv(path: str | Path) -> np.ndarray:
    fees = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            try:
                fee = float(row[0])
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise ValueError(f"{path}:{lineno}: malformed fee {row[0]!r}") from None
            if not fee >= 0 or math.isinf(fee):
                raise ValueError(f"{path}:{lineno}: fee must be a finite non-negative number")
            fees.append(fee)
    if not fees:
        raise ValueError(f"{path}: no fees")
    return np.asarray(fees)


class FeeSampler:
    """Sequential fee source; successive ``take`` calls continue the stream."""

    def __init__(self, dist: FeeDist, seed):
        self.dist = dist
        self._rng = _rng(seed)
        self._replay = read_fee_csv(dist.path) if dist.kind == "csv_replay" else None
        self._pos = 0
        self.wrapped = False

    def take(self, n: int) -> np.ndarray:
        d = self.dist
        if d.kind == "constant":
            return np.full(n, float(d.value))
        if d.kind == "lognormal":
            return self._rng.lognormal(d.mu, d.sigma, n)
        idx = (self._pos + np.arange(n)) % len(self._replay)
        if n and self._pos + n > len(self._replay) and not self.wrapped:
            self.wrapped = True
            warnings.warn(f"fee file {d.path} exhausted after {len(self._replay)} rows; cycling",
                          FeeReplayWrapped, stacklevel=2)
        self._pos += n
        return self._replay[idx]


def sample_fees(stream, dist: FeeDist, seed) -> np.ndarray:
    """Fees for each element of ``stream`` (or for ``stream`` transactions if an int)."""
    n = stream if isinstance(stream, int) else len(stream)
    return FeeSampler(dist, seed).take(n)


def transactions(arrivals: Sequence[float], fees: Sequence[float], *, start_id: int = 0,
                 size: int = DEFAULT_TX_SIZE) -> Iterator[Transaction]:
    for i, (t, fee) in enumerate(zip(arrivals, fees)):
        yield Transaction(start_id + i, float(t), size, float(fee))


def runs_from_ids(ids: np.ndarray) -> np.ndarray:
    """Compress sorted unique ids into [start, stop) runs, shape (k, 2)."""
    ids = np.asarray(ids, dtype=np.int64)
    if len(ids) == 0:
        return np.empty((0, 2), dtype=np.int64)
    breaks = np.flatnonzero(np.diff(ids) != 1) + 1
    starts = ids[np.concatenate(([0], breaks))]
    stops = ids[np.concatenate((breaks - 1, [len(ids) - 1]))] + 1
    return np.stack([starts, stops], axis=1)


def ids_from_runs(runs: np.ndarray) -> np.ndarray:
    if len(runs) == 0:
        return np.empty(0, dtype=np.int64)
    return np.concatenate([np.arange(a, b, dtype=np.int64) for a, b in runs])


FRESH, CONFIRMED, RETURNED = 0, 1, 2


class Mempool:
    """Pending transactions relative to the canonical chain.

    Per-transaction state lives in a sliding window of arrays. Fees are drawn
    lazily as ids are first touched, so a very large backlog costs nothing
    until it is mined. Ids below the window base are settled: confirmed deep
    enough that no reorg can return them.
    """

    def __init__(self, backlog: int, arrivals: np.ndarray, fees: FeeSampler, chunk: int = 1 << 16):
        if backlog < 0:
            raise ValueError("backlog must be non-negative")
        self.backlog = int(backlog)
        self.arrivals = np.asarray(arrivals, dtype=float)
        if len(self.arrivals) and np.any(np.diff(self.arrivals) < 0):
            raise ValueError("arrivals must be sorted")
        self.total = self.backlog + len(self.arrivals)
        self._fees = fees
        self._chunk = chunk
        self._base = 0
        self._fee = np.empty(0)
        self._state = np.empty(0, dtype=np.int8)
        self.visible = self.backlog
        self._lo = 0
        self._settled = 0

    @property
    def materialized(self) -> int:
        return self._base + len(self._state)

    @property
    def exhausted(self) -> bool:
        """No arrivals remain to be admitted."""
        return self.visible == self.total

    def admit(self, now: float) -> None:
        self.visible = self.backlog + int(np.searchsorted(self.arrivals, now, side="right"))

    def _materialize(self, upto: int) -> None:
        upto = min(upto, self.total)
        if upto <= self.materialized:
            return
        n = min(self.total - self.materialized, max(upto - self.materialized, self._chunk))
        self._fee = np.concatenate([self._fee, self._fees.take(n)])
        self._state = np.concatenate([self._state, np.zeros(n, dtype=np.int8)])

    def _pending_between(self, start: int, stop: int) -> np.ndarray:
        self._materialize(stop)
        seg = self._state[start - self._base: stop - self._base]
        return start + np.flatnonzero(seg != CONFIRMED)

    @staticmethod
    def _adjust(ids, include, exclude):
        if include is not None and len(include):
            ids = np.union1d(ids, include)
        if exclude is not None and len(exclude):
            ids = np.setdiff1d(ids, exclude, assume_unique=True)
        return ids

    def head(self, k: int, include=None, exclude=None) -> np.ndarray:
        """First ``k`` pending ids in arrival order.

        ``include``/``exclude`` adjust the view for a block built off the
        canonical tip: transactions of canonical blocks above the fork point
        count as pending, those already in the side branch do not.
        """
        need = k + (len(exclude) if exclude is not None else 0)
        parts, found, start = [], 0, self._lo
        while found < need and start < self.visible:
            stop = min(self.visible, start + max(2 * need, 1024))
            ids = self._pending_between(start, stop)
            parts.append(ids)
            found += len(ids)
            start = stop
        ids = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
        return self._adjust(ids, include, exclude)[:k]

    def all_pending(self, include=None, exclude=None) -> np.ndarray:
        return self._adjust(self._pending_between(self._lo, self.visible), include, exclude)

    def fees(self, ids: np.ndarray) -> np.ndarray:
        return self._fee[np.asarray(ids) - self._base]

    def confirm(self, ids: np.ndarray) -> None:
        ids = np.asarray(ids)
        if len(ids) == 0:
            return
        if ids.max() >= self.visible:
            raise RuntimeError("confirming a transaction that has not arrived")
        self._materialize(int(ids.max()) + 1)
        idx = ids - self._base
        if idx.min() < 0 or np.any(self._state[idx] == CONFIRMED):
            raise RuntimeError("transaction confirmed twice on the canonical chain")
        self._state[idx] = CONFIRMED
        self._advance_lo()

    def unconfirm(self, ids: np.ndarray) -> None:
        """Return transactions of a block that left the canonical chain."""
        idx = np.asarray(ids) - self._base
        if len(idx) == 0:
            return
        if idx.min() < 0:
            raise RuntimeError("reorg reached below the settled window")
        if np.any(self._state[idx] != CONFIRMED):
            raise RuntimeError("returning a transaction that was not confirmed")
        self._state[idx] = RETURNED
        self._lo = min(self._lo, int(np.min(ids)))

    def _advance_lo(self) -> None:
        while self._lo < self.materialized:
            stop = min(self.materialized, self._lo + 4096)
            nz = np.flatnonzero(self._state[self._lo - self._base: stop - self._base] != CONFIRMED)
            if len(nz):
                self._lo += int(nz[0])
                return
            self._lo = stop

    def compact(self, min_live_id: int, threshold: int = 1 << 18) -> None:
        """Drop window entries below both the lowest pending id and ``min_live_id``."""
        new_base = min(self._lo, min_live_id, self.materialized)
        cut = new_base - self._base
        if cut < threshold:
            return
        if np.any(self._state[:cut] != CONFIRMED):
            raise RuntimeError("compacting a pending transaction")
        self._settled += cut
        self._fee = self._fee[cut:].copy()
        self._state = self._state[cut:].copy()
        self._base = new_base

    def counts(self) -> dict[str, int]:
        """Confirmed / returned / fresh split of every admitted transaction."""
        upto = min(self.visible, self.materialized) - self._base
        window = self._state[:upto]
        confirmed = self._settled + int(np.count_nonzero(window == CONFIRMED))
        returned = int(np.count_nonzero(window == RETURNED))
        fresh = int(np.count_nonzero(window == FRESH)) + max(0, self.visible - self.materialized)
        return {"confirmed": confirmed, "returned": returned, "fresh": fresh,
                "admitted": self.visible}

    def has_pending(self) -> bool:
        return self._lo < self.visible

    def pending_count(self) -> int:
        c = self.counts()
        return c["returned"] + c["fresh"]
