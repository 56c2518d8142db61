from dataclasses import replace

import numpy as np
import pytest

from dmisim import numerics
from dmisim.dmi import DmiConfig, next_target
from dmisim.engine import (CalibrationError, Scenario, ScenarioError, WorkloadConfig, _Chain,
                           calibrate_network, genesis_target, run)
from dmisim.metrics import blocks_csv
from dmisim.propagation import NetworkParams, uninformed_for_size
from dmisim.workload import FeeDist, FeeSampler, Mempool

FULL = 1_001_000


def _fork_rate(net, size=FULL, interval=600.0):
    return numerics.fork_rate_from_interval(interval, uninformed_for_size(size, net))


def _check_structure(r):
    s = r.scenario
    ids = {b.id for b in r.blocks}
    for b in r.blocks[1:]:
        parent = r.blocks[b.parent_id]
        assert b.parent_id in ids
        assert b.height == parent.height + 1 and b.time > parent.time
        assert b.size <= s.max_block_bytes + 1000
    canonical = np.concatenate([b.tx_ids for b in r.canonical])
    assert len(np.unique(canonical)) == len(canonical) == r.confirmed
    on_chain = {b.id for b in r.canonical}
    assert all(b.stale == (b.id not in on_chain) for b in r.blocks)
    assert r.audit()


def test_empty_workload_block_count():
    s = Scenario(workload=WorkloadConfig(initial_backlog=0), duration=600 * 2000, seed=3,
                 calibrate=True)
    r = run(s)
    mined = len(r.blocks) - 1
    assert r.confirmed == 0 and not r.drained
    assert abs(mined - 2000) < 3 * np.sqrt(2000)
    assert all(b.tx_count == 0 and b.size == 1000 for b in r.blocks)


def test_same_seed_same_result():
    s = Scenario(mode="dmi", assembly="dts", calibrate=True, duration=50_000, seed=5,
                 workload=WorkloadConfig(initial_backlog=20_000, fees=FeeDist("lognormal", mu=-1)))
    a, b = run(s, trace=True), run(s, trace=True)
    assert blocks_csv(a) == blocks_csv(b)
    assert a.trace == b.trace
    c = run(replace(s, seed=6))
    assert blocks_csv(c) != blocks_csv(a)


def _forky(assembly):
    # slow network and short interval: many forks and reorgs
    s = Scenario(mode="fixed_interval", assembly=assembly, baseline_interval=20.0,
                 duration=30_000, seed=1, network=NetworkParams(bandwidth=400_000.0, delay=0.2),
                 workload=WorkloadConfig(initial_backlog=5_000, profile="default",
                                         fees=FeeDist("lognormal")))
    return run(s, trace=True)


@pytest.fixture(scope="module", params=["standard", "dts", "fee_priority"])
def forky(request):
    return _forky(request.param)


def test_forks_and_reorgs_keep_invariants(forky):
    stale = sum(b.stale for b in forky.blocks)
    assert stale > 50
    _check_structure(forky)


def test_stale_exclusive_transactions_return(tmp_path):
    # Scripted race with fee-first assembly, two transactions per block. Branch A
    # mines the best backlog fees; branch B starts later, after four high-fee
    # arrivals, outgrows A and never reaches A2's transactions.
    fees = tmp_path / "fees.csv"
    fees.write_text("\n".join(map(str, [1, 2, 3, 4, 5, 6, 10, 11, 12, 13])) + "\n")
    s = Scenario(assembly="fee_priority", max_block_bytes=1000, calibrate=True,
                 workload=WorkloadConfig(initial_backlog=0))
    ch = _Chain(s, s.resolved_network(), trace=True)
    ch.mempool = Mempool(6, np.array([2.5, 2.5, 2.5, 2.5]),
                         FeeSampler(FeeDist("csv_replay", path=str(fees)), None))
    script = iter([0, 1, 0, 3, 4, 5])
    ch.choose_parent = lambda t: ch.blocks[next(script)]
    a1, a2 = ch.mine(1.0), ch.mine(2.0)
    assert a1.tx_ids.tolist() == [4, 5] and a2.tx_ids.tolist() == [2, 3]
    b1, b2, b3 = ch.mine(3.0), ch.mine(3.5), ch.mine(4.0)
    assert [b.tx_ids.tolist() for b in (b1, b2, b3)] == [[8, 9], [6, 7], [4, 5]]
    assert ch.tip is b3 and a1.stale and a2.stale
    assert ch.trace[-1] == {"event": "reorg", "t": 4.0, "old_tip": a2.id, "new_tip": b3.id,
                            "fork_height": 0, "depth": 2, "returned": 2}
    assert ch.mempool.counts() == {"confirmed": 6, "returned": 2, "fresh": 2, "admitted": 10}
    c = ch.mine(5.0)
    assert c.tx_ids.tolist() == [2, 3]
    assert ch.mempool.counts()["returned"] == 0


def test_dmi_targets_follow_block_size():
    net = calibrate_network(0.0095, FULL, 600.0, NetworkParams())
    s = Scenario(mode="dmi", assembly="dts", network=net, duration=30_000, seed=2,
                 workload=WorkloadConfig(initial_backlog=50_000, fees=FeeDist("lognormal", mu=-1)))
    r = run(s)
    cfg = DmiConfig(network=net)
    assert r.blocks[0].target == genesis_target(s)
    for b in r.blocks[1:]:
        assert b.target == next_target(b.size, cfg)
    _check_structure(r)


def test_drains_finite_workload():
    s = Scenario(calibrate=True, seed=4, duration=1e7,
                 workload=WorkloadConfig(initial_backlog=10_000))
    r = run(s)
    assert r.drained and r.confirmed == 10_000
    assert r.duration == r.canonical[-1].time
    assert sum(b.tx_count for b in r.canonical) == 10_000


def test_genesis_target():
    s = Scenario()
    assert numerics.difficulty_from_target(genesis_target(s)) == pytest.approx(2.4e10, rel=1e-12)
    dmi = Scenario(mode="dmi", baseline_interval=1.5)
    assert numerics.interval_from_target(genesis_target(dmi), 4e7) == pytest.approx(2.0)
    assert genesis_target(s) == genesis_target(Scenario())


@pytest.mark.parametrize("kw", [dict(mode="epochs"), dict(assembly="greedy"), dict(duration=0.0),
                                dict(baseline_interval=1.0), dict(max_block_bytes=10),
                                dict(propagation_model="flood")])
def test_scenario_validation(kw):
    with pytest.raises(ScenarioError):
        Scenario(**kw)


def test_workload_validation():
    with pytest.raises(ScenarioError):
        WorkloadConfig(initial_backlog=-1)


def test_calibration_postcondition():
    net = calibrate_network(0.0095, FULL, 600.0, NetworkParams())
    assert _fork_rate(net) == pytest.approx(0.0095, abs=1e-4)
    assert calibrate_network(0.0095, FULL, 600.0, net) is net


def test_calibration_monotone():
    delays = [calibrate_network(r, FULL, 600.0, NetworkParams()).delay
              for r in (0.0095, 0.012, 0.02, 0.05)]
    assert all(a < b for a, b in zip(delays, delays[1:]))


def test_calibration_errors():
    with pytest.raises(CalibrationError):
        calibrate_network(0.2, FULL, 600.0, NetworkParams())
    with pytest.raises(CalibrationError):
        # already above target with zero delay
        calibrate_network(0.001, FULL, 600.0, NetworkParams(bandwidth=1e5))
