import csv
import io

import numpy as np
import pytest

from dmisim.config import load_config
from dmisim.engine import Block, Scenario, SimResult, WorkloadConfig, run
from dmisim.metrics import (BLOCK_COLUMNS, TIMELINE_COLUMNS, MetricsError, blocks_csv, report,
                            timeline_csv, timeline_rows)
from dmisim.numerics import MAX_TARGET, Target
from dmisim.propagation import NetworkParams
from dmisim.workload import runs_from_ids

T = Target(MAX_TARGET >> 40)


def _block(i, parent, height, time, txs=(), fees=0.0, stale=False):
    ids = np.asarray(txs, dtype=np.int64)
    return Block(i, height, parent, time, len(ids) * 500 + 1000, T, 600.0, runs_from_ids(ids),
                 len(ids), fees, stale)


def _result(blocks, tip, *, duration=1000.0, drained=False, backlog=0):
    confirmed = 0
    b = blocks[tip]
    while b.parent_id is not None:
        confirmed += b.tx_count
        b = blocks[b.parent_id]
    return SimResult(Scenario(), NetworkParams(), blocks, tip, confirmed, 0,
                     backlog - confirmed, 0, backlog, duration, drained)


def test_hand_built_three_blocks():
    blocks = [_block(0, None, 0, 0.0),
              _block(1, 0, 1, 100.0, range(0, 10), 10.0),
              _block(2, 0, 1, 120.0, range(0, 10), 10.0, stale=True),
              _block(3, 1, 2, 400.0, range(10, 30), 20.0)]
    r = _result(blocks, 3, duration=1000.0, backlog=30)
    m = report(r)
    assert m.fork_rate == pytest.approx(1 / 3)
    assert m.canonical_blocks == 2 and m.stale_blocks == 1
    assert m.tps == pytest.approx(30 / 1000.0) and m.makespan is None
    assert m.mean_interval == pytest.approx(200.0)
    assert m.mean_block_fill == pytest.approx((10 + 20) * 500 / 2 / 1_000_000)
    assert m.fee_cv == pytest.approx(np.std([10.0, 20.0]) / 15.0)
    assert report(r) == m


def test_makespan_denominator_when_drained():
    blocks = [_block(0, None, 0, 0.0), _block(1, 0, 1, 250.0, range(5), 5.0),
              _block(2, 1, 2, 500.0)]
    m = report(_result(blocks, 2, duration=900.0, drained=True, backlog=5))
    assert m.makespan == 250.0 and m.elapsed == 250.0 and m.tps == pytest.approx(5 / 250)
    assert m.fee_cv is None  # a single non-empty block


def test_no_stale_no_forks():
    blocks = [_block(0, None, 0, 0.0), _block(1, 0, 1, 10.0)]
    assert report(_result(blocks, 1)).fork_rate == 0.0


def test_zero_elapsed_is_an_error():
    blocks = [_block(0, None, 0, 0.0)]
    with pytest.raises(MetricsError):
        report(_result(blocks, 0, duration=0.0))


def test_empty_timeline_is_header_only():
    r = _result([_block(0, None, 0, 0.0)], 0)
    assert timeline_csv(r) == ",".join(TIMELINE_COLUMNS) + "\n"


@pytest.fixture(scope="module")
def hundred():
    s = Scenario(seed=8, baseline_interval=120.0, duration=1e9,
                 workload=WorkloadConfig(initial_backlog=0, profile="default"))
    r = run(s)
    r.blocks = r.blocks[:101]
    last = max((b for b in r.blocks if not b.stale), key=lambda b: b.height)
    r.tip_id = last.id
    r.confirmed = sum(b.tx_count for b in r.canonical)
    return r


def test_instant_tps_brute_force(hundred):
    rows = list(csv.DictReader(io.StringIO(timeline_csv(hundred))))
    assert len(rows) == len(hundred.blocks) - 1 == 100
    assert tuple(rows[0]) == TIMELINE_COLUMNS
    canon = {b.id for b in hundred.canonical}
    blocks = sorted(hundred.blocks[1:], key=lambda b: (b.time, b.id))
    for row, b in zip(rows, blocks):
        t = b.time
        window = sum(x.tx_count for x in hundred.blocks[1:]
                     if x.id in canon and t - 3600 < x.time <= t)
        upto = sum(x.tx_count for x in hundred.blocks[1:] if x.id in canon and x.time <= t)
        assert float(row["instant_tps"]) == pytest.approx(window / 3600, rel=1e-12)
        assert float(row["cumulative_tps"]) == pytest.approx(upto / t, rel=1e-12)
        assert float(row["block_time_min"]) == pytest.approx(t / 60)
        assert int(row["block_size_bytes"]) == b.size


def test_blocks_csv_columns(hundred):
    rows = list(csv.reader(io.StringIO(blocks_csv(hundred))))
    assert tuple(rows[0]) == BLOCK_COLUMNS
    assert len(rows) == len(hundred.blocks) + 1
    assert all(len(r[4]) == 64 for r in rows[1:])


def test_timeline_rows_pure(hundred):
    assert timeline_rows(hundred) == timeline_rows(hundred)


@pytest.mark.slow
def test_fixed_interval_day_block_count():
    # the fixed-interval run of the one-day workload needs about 168 blocks
    m = report(run(load_config("sim2")))
    assert m.canonical_blocks == pytest.approx(168, rel=0.05)
