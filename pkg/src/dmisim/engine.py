"""Seeded discrete-event simulation of mining, propagation and forks.

The whole network is modelled as one Poisson clock. A discovery at time t
extends the highest block the discovering node knows about: a block found at
t0 is known with probability f(t - t0) from its informed curve, and every
block whose propagation window has closed is known for sure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from . import numerics
from .dmi import DmiConfig, retarget
from .dts import (HEADER_BYTES, DtsConfig, assemble_dts_block, assemble_fee_priority_block,
                  assemble_standard_block)
from .numerics import Target
from .propagation import InformedCurve, NetworkParams, informed_curve, uninformed_for_size
from .workload import (DEFAULT_TX_SIZE, FeeDist, FeeSampler, Mempool, generate_arrivals,
                       ids_from_runs, load_profile, runs_from_ids)

MODES = ("fixed_interval", "dmi")
ASSEMBLIES = ("standard", "dts", "fee_priority")
REORG_HORIZON = 64


class ScenarioError(ValueError):
    pass


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class WorkloadConfig:
    initial_backlog: int = 16_000
    profile: str | None = None  # None: no arrivals; "default": bundled profile; else a CSV path
    profile_scale: float = 1.0
    days: int = 1
    fees: FeeDist = field(default_factory=FeeDist)
    tx_size: int = DEFAULT_TX_SIZE

    def __post_init__(self):
        if self.initial_backlog < 0:
            raise ScenarioError("workload.initial_backlog must be non-negative")
        if self.profile_scale < 0:
            raise ScenarioError("workload.profile_scale must be non-negative")
        if self.days < 1:
            raise ScenarioError("workload.days must be >= 1")
        if self.tx_size <= 0:
            raise ScenarioError("workload.tx_size must be positive")


@dataclass(frozen=True)
class Scenario:
    mode: str = "fixed_interval"
    assembly: str = "standard"
    dmi: DmiConfig = field(default_factory=DmiConfig)
    dts: DtsConfig = field(default_factory=DtsConfig)
    network: NetworkParams = field(default_factory=NetworkParams)
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    duration: float = 86_400.0
    seed: int = 0
    baseline_interval: float = 600.0
    max_block_bytes: int = 1_000_000
    stop_when_drained: bool = True
    # fit network.delay so a full block at the baseline interval forks at dmi.fork_limit
    calibrate: bool = False
    propagation_model: str = "collision"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ScenarioError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.assembly not in ASSEMBLIES:
            raise ScenarioError(f"assembly must be one of {ASSEMBLIES}, got {self.assembly!r}")
        if not self.duration > 0:
            raise ScenarioError("duration must be positive")
        if not self.baseline_interval > 1:
            raise ScenarioError("baseline_interval must exceed 1 s")
        if self.max_block_bytes < self.workload.tx_size:
            raise ScenarioError("max_block_bytes must hold at least one transaction")
        if self.propagation_model not in ("collision", "linear"):
            raise ScenarioError(f"unknown propagation_model {self.propagation_model!r}")

    @property
    def max_txs(self) -> int:
        return self.max_block_bytes // self.workload.tx_size

    @property
    def full_block_size(self) -> int:
        return self.max_txs * self.workload.tx_size + HEADER_BYTES

    def resolved_network(self) -> NetworkParams:
        if not self.calibrate:
            return self.network
        return calibrate_network(self.dmi.fork_limit, self.full_block_size,
                                 self.baseline_interval, self.network, self.propagation_model)


@dataclass
class Block:
    id: int
    height: int
    parent_id: int | None
    time: float
    size: int
    target: Target  # governs the mining of this block's children
    interval: float  # expected interval implied by ``target``
    tx_runs: np.ndarray
    tx_count: int
    total_fees: float
    stale: bool = False

    @property
    def tx_ids(self) -> np.ndarray:
        return ids_from_runs(self.tx_runs)

    @property
    def min_tx_id(self) -> int | None:
        return int(self.tx_runs[0, 0]) if len(self.tx_runs) else None


@dataclass
class SimResult:
    scenario: Scenario
    network: NetworkParams
    blocks: list[Block]
    tip_id: int
    confirmed: int
    returned_pending: int
    fresh_pending: int
    generated: int
    initial_backlog: int
    duration: float
    drained: bool
    trace: list[dict] | None = None

    @property
    def canonical(self) -> list[Block]:
        chain, b = [], self.blocks[self.tip_id]
        while b is not None:
            chain.append(b)
            b = self.blocks[b.parent_id] if b.parent_id is not None else None
        return chain[::-1]

    @property
    def intervals(self) -> np.ndarray:
        return np.array([b.interval for b in self.blocks])

    def audit(self) -> bool:
        """Confirmed (from the block log) + returned + fresh == generated + backlog."""
        from_log = sum(b.tx_count for b in self.canonical)
        if from_log != self.confirmed:
            return False
        return (from_log + self.returned_pending + self.fresh_pending
                == self.generated + self.initial_backlog)


def genesis_target(s: Scenario) -> Target:
    interval = s.baseline_interval
    if s.mode == "dmi":
        interval = min(max(interval, s.dmi.min_interval), s.dmi.max_interval)
    return numerics.target_for_interval(interval, s.dmi.hash_rate)


def _analytic_fork_rate(delay, block_size, interval, base, model):
    w = uninformed_for_size(block_size, replace(base, delay=delay), model)
    return numerics.fork_rate_from_interval(interval, w)


def calibrate_network(target_fork_rate: float, block_size: float, interval: float,
                      base: NetworkParams, model: str = "collision") -> NetworkParams:
    """Per-hop delay that makes the analytic fork rate hit ``target_fork_rate``."""
    if not 0 < target_fork_rate < 0.1:
        raise CalibrationError("target fork rate must lie in (0, 0.1)")
    current = _analytic_fork_rate(base.delay, block_size, interval, base, model)
    if math.isclose(current, target_fork_rate, rel_tol=1e-12):
        return base

    def gap(delay):
        return _analytic_fork_rate(delay, block_size, interval, base, model) - target_fork_rate

    if gap(0.0) > 0:
        raise CalibrationError("target fork rate is below the zero-delay rate; raise bandwidth")
    hi = max(1.0, 2 * base.delay)
    while gap(hi) < 0:
        hi *= 2
        if hi > 1e9:
            raise CalibrationError("could not bracket the calibration root")
    delay = optimize.bisect(gap, 0.0, hi, xtol=1e-15, maxiter=500)
    return replace(base, delay=delay)


class _Chain:
    def __init__(self, s: Scenario, network: NetworkParams, trace: bool):
        self.s = s
        self.network = network
        self.dmi_cfg = replace(s.dmi, network=network)
        seq = np.random.SeedSequence(s.seed)
        mine_ss, view_ss, arrival_ss, fee_ss = seq.spawn(4)
        self.mine_rng = np.random.default_rng(mine_ss)
        self.view_rng = np.random.default_rng(view_ss)

        w = s.workload
        if w.profile is None:
            arrivals = np.empty(0)
        else:
            profile = load_profile(None if w.profile == "default" else w.profile)
            if w.profile_scale != 1.0:
                profile = profile.scaled(w.profile_scale)
            arrivals = generate_arrivals(profile, np.random.default_rng(arrival_ss), days=w.days)
        self.mempool = Mempool(w.initial_backlog, arrivals,
                               FeeSampler(w.fees, np.random.default_rng(fee_ss)))
        self.trace = [] if trace else None
        self._curves: dict[int, InformedCurve] = {}
        self._retargets: dict[int, tuple[Target, float]] = {}
        self._fixed = genesis_target(s)
        self._fixed_interval = numerics.interval_from_target(self._fixed, s.dmi.hash_rate)

        g = Block(0, 0, None, 0.0, HEADER_BYTES, self._fixed, self._fixed_interval,
                  np.empty((0, 2), dtype=np.int64), 0, 0.0)
        self.blocks = [g]
        self.tip = g
        self.open: list[Block] = []
        self.best_closed = g
        self.closes_at: dict[int, float] = {}

    # ---- helpers -------------------------------------------------------
    @staticmethod
    def _key(b: Block):
        return (-b.height, b.time, b.id)

    def curve(self, size: int) -> InformedCurve:
        c = self._curves.get(size)
        if c is None:
            c = self._curves[size] = informed_curve(size, self.network, self.s.propagation_model)
        return c

    def child_target(self, size: int) -> tuple[Target, float]:
        if self.s.mode == "fixed_interval":
            return self._fixed, self._fixed_interval
        hit = self._retargets.get(size)
        if hit is None:
            r = retarget(size, self.dmi_cfg)
            hit = self._retargets[size] = (r.target, numerics.interval_from_target(r.target, self.s.dmi.hash_rate))
        return hit

    def _close_windows(self, t: float) -> None:
        still = []
        for b in self.open:
            if self.closes_at[b.id] <= t:
                if self._key(b) < self._key(self.best_closed):
                    self.best_closed = b
            else:
                still.append(b)
        self.open = still

    def choose_parent(self, t: float) -> Block:
        self._close_windows(t)
        best_key = self._key(self.best_closed)
        for b in sorted(self.open, key=self._key):
            if self._key(b) > best_key:
                break
            if self.view_rng.random() < self.curve(b.size)(t - b.time):
                return b
        return self.best_closed

    def branch_to(self, ancestor: Block, b: Block) -> list[Block]:
        """Blocks strictly above ``ancestor`` up to ``b``, oldest first."""
        out = []
        while b.id != ancestor.id:
            out.append(b)
            b = self.blocks[b.parent_id]
        return out[::-1]

    def fork_point(self, a: Block, b: Block) -> Block:
        while a.height > b.height:
            a = self.blocks[a.parent_id]
        while b.height > a.height:
            b = self.blocks[b.parent_id]
        while a.id != b.id:
            a, b = self.blocks[a.parent_id], self.blocks[b.parent_id]
        return a

    @staticmethod
    def _ids(blocks: list[Block]) -> np.ndarray | None:
        parts = [b.tx_ids for b in blocks if b.tx_count]
        return np.concatenate(parts) if parts else None

    # ---- block production ----------------------------------------------
    def assemble(self, parent: Block):
        include = exclude = None
        if parent.id != self.tip.id:
            a = self.fork_point(parent, self.tip)
            include = self._ids(self.branch_to(a, self.tip))
            exclude = self._ids(self.branch_to(a, parent))
        s, mp = self.s, self.mempool
        if s.assembly == "fee_priority":
            ids = mp.all_pending(include, exclude)
            fees = mp.fees(ids)
            asm = assemble_fee_priority_block(fees, s.max_block_bytes, s.workload.tx_size)
        else:
            ids = mp.head(s.max_txs, include, exclude)
            fees = mp.fees(ids)
            if s.assembly == "dts":
                asm = assemble_dts_block(fees, s.dts, s.workload.tx_size, max_txs=s.max_txs)
            else:
                asm = assemble_standard_block(fees, s.max_block_bytes, s.workload.tx_size)
        return ids[asm.selected], asm

    def mine(self, t: float) -> Block:
        self.mempool.admit(t)
        parent = self.choose_parent(t)
        ids, asm = self.assemble(parent)
        target, interval = self.child_target(asm.block_size)
        b = Block(len(self.blocks), parent.height + 1, parent.id, t, asm.block_size, target,
                  interval, runs_from_ids(ids), len(ids), asm.total_fees)
        self.blocks.append(b)
        self.open.append(b)
        self.closes_at[b.id] = t + self.curve(b.size).duration
        if self.trace is not None:
            self.trace.append({"event": "block", "t": t, "id": b.id, "parent": parent.id,
                               "height": b.height, "size": b.size, "txs": b.tx_count})
        if parent.id == self.tip.id:
            self.mempool.confirm(ids)
            self.tip = b
        elif b.height > self.tip.height:
            self.reorg(b, t)
        else:
            b.stale = True
        return b

    def reorg(self, new_tip: Block, t: float) -> None:
        a = self.fork_point(new_tip, self.tip)
        old = self.branch_to(a, self.tip)
        new = self.branch_to(a, new_tip)
        old_ids = self._ids(old)
        new_ids = self._ids(new)
        if old_ids is not None:
            self.mempool.unconfirm(np.sort(old_ids))
        if new_ids is not None:
            self.mempool.confirm(np.sort(new_ids))
        for b in old:
            b.stale = True
        for b in new:
            b.stale = False
        if self.trace is not None:
            returned = 0
            if old_ids is not None:
                returned = len(old_ids) if new_ids is None else len(np.setdiff1d(old_ids, new_ids))
            self.trace.append({"event": "reorg", "t": t, "old_tip": self.tip.id,
                               "new_tip": new_tip.id, "fork_height": a.height,
                               "depth": len(old), "returned": returned})
        self.tip = new_tip

    def compact(self) -> None:
        floor = self.tip.height - REORG_HORIZON
        live = [b.min_tx_id for b in self.blocks[-8 * REORG_HORIZON:]
                if b.height >= floor and b.min_tx_id is not None]
        self.mempool.compact(min(live) if live else self.mempool.materialized)

    def drained(self) -> bool:
        mp = self.mempool
        return mp.total > 0 and mp.exhausted and not mp.has_pending()


def run(s: Scenario, trace: bool = False) -> SimResult:
    network = s.resolved_network()
    ch = _Chain(s, network, trace)
    t = 0.0
    drained = False
    while True:
        t += ch.mine_rng.exponential(ch.tip.interval)
        if t > s.duration:
            break
        ch.mine(t)
        if ch.tip.height % 32 == 0:
            ch.compact()
        if s.stop_when_drained and ch.drained():
            drained = True
            break
    end = t if drained else s.duration
    counts = ch.mempool.counts()
    return SimResult(
        scenario=s, network=network, blocks=ch.blocks, tip_id=ch.tip.id,
        confirmed=counts["confirmed"], returned_pending=counts["returned"],
        fresh_pending=counts["fresh"], generated=counts["admitted"] - ch.mempool.backlog,
        initial_backlog=ch.mempool.backlog, duration=end, drained=drained, trace=ch.trace)
