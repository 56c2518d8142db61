import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from frozen import MC_SEED, MC_WAVES
from dmisim.propagation import (NetworkParams, curve_table, informed_curve,
                                pairwise_propagation_interval, uninformed_for_size,
                                uninformed_integral, wave_counts)


def test_pairwise_interval():
    p = NetworkParams(bandwidth=1_000_000.0, delay=0.1)
    assert pairwise_propagation_interval(1_000_000, p) == pytest.approx(1.1)
    assert pairwise_propagation_interval(0, p) == pytest.approx(0.1)
    q = NetworkParams(bandwidth=5e5)
    assert pairwise_propagation_interval(2e5, q) * 2 == pairwise_propagation_interval(4e5, q)


@pytest.mark.parametrize("kw", [dict(node_count=1), dict(neighbor_degree=0),
                                dict(node_count=8, neighbor_degree=8), dict(bandwidth=0.0),
                                dict(delay=-1.0)])
def test_network_validation(kw):
    with pytest.raises(ValueError):
        NetworkParams(**kw)


@pytest.mark.parametrize("model", ["collision", "linear"])
def test_first_wave_reaches_one_plus_m(model):
    assert wave_counts(10, 3, model)[1] == pytest.approx(4.0)


def test_linear_model_second_wave():
    # P_2 counts the originator: (10 - 4) / 10
    assert wave_counts(10, 3, "linear")[2] == pytest.approx(4 + 3 * 3 * 0.6)


@pytest.mark.parametrize("model", ["collision", "linear"])
def test_two_nodes_one_wave(model):
    c = informed_curve(1000, NetworkParams(node_count=2, neighbor_degree=1,
                                           bandwidth=500.0), model)
    assert c.informed_counts == (1.0, 2.0) and c.waves == 1
    assert c.wave_interval == 2.0
    assert uninformed_integral(c) == pytest.approx(1.0)


def test_unknown_model():
    with pytest.raises(ValueError):
        wave_counts(10, 3, "gossip")


def test_instant_network_has_zero_integral():
    c = informed_curve(0, NetworkParams(delay=0.0))
    assert c.wave_interval == 0 and uninformed_integral(c) == 0.0
    assert c(0.0) == 1.0


def test_step_function_values():
    p = NetworkParams(node_count=100, neighbor_degree=8, bandwidth=1000.0)
    c = informed_curve(1000, p)
    assert c(0.0) == pytest.approx(0.01)
    assert c(0.999) == pytest.approx(0.01)
    assert c(1.0) == pytest.approx(0.09)
    assert c(c.duration) == 1.0 and c(1e9) == 1.0
    with pytest.raises(ValueError):
        c(-1.0)
    table = curve_table(c)
    assert table[0] == (0.0, 0.01) and table[-1][1] == 1.0


@st.composite
def network(draw):
    n = draw(st.integers(2, 20_000))
    m = draw(st.integers(1, min(16, n - 1)))
    return NetworkParams(n, m, draw(st.floats(1e3, 1e9)), draw(st.floats(0.0, 5.0)))


@settings(max_examples=200, deadline=None)
@given(network(), st.floats(1.0, 4e6), st.sampled_from(["collision", "linear"]))
def test_curve_invariants(p, size, model):
    c = informed_curve(size, p, model)
    counts = np.asarray(c.informed_counts)
    assert counts[0] == 1.0 and counts[-1] == p.node_count
    assert np.all(np.diff(counts) >= 0) and np.all(counts <= p.node_count)
    f = c.fractions()
    assert f[0] == pytest.approx(1 / p.node_count) and f[-1] == 1.0
    w = uninformed_integral(c)
    assert 0 <= w <= p.node_count * c.wave_interval
    assert math.isfinite(w)


@settings(max_examples=100, deadline=None)
@given(network(), st.floats(1.0, 2e6), st.floats(1.01, 3.0))
def test_integral_increases_with_size_and_scales_with_tp(p, size, factor):
    small = informed_curve(size, p)
    big = informed_curve(size * factor, p)
    assert uninformed_integral(big) > uninformed_integral(small)
    ratio = uninformed_integral(big) / uninformed_integral(small)
    assert ratio == pytest.approx(big.wave_interval / small.wave_interval, rel=1e-12)


def test_matches_frozen_agent_simulation():
    for n, waves in MC_WAVES.items():
        model = wave_counts(n, 8)
        for k, ref in enumerate(waves):
            expected = model[k] if k < len(model) else n
            assert expected == pytest.approx(ref, rel=0.05), (n, k)


def test_frozen_agent_values_reproduce():
    got = oracles.push_waves(50, 8, 10_000, np.random.default_rng(MC_SEED), 8)
    assert np.allclose(got, MC_WAVES[50], atol=1e-4)


def test_literal_recurrence_misses_agent_simulation():
    # kept for comparison: it double-counts pushes that land on the same node
    lin = wave_counts(1000, 8, "linear")
    assert abs(lin[3] - MC_WAVES[1000][3]) / MC_WAVES[1000][3] > 0.05


def test_calibrated_full_block_constants():
    p = NetworkParams()
    assert uninformed_for_size(1, NetworkParams(bandwidth=1e300, delay=1.0)) == pytest.approx(
        4.625109, abs=1e-6)
    assert pairwise_propagation_interval(1_001_000, p) == pytest.approx(1.220732, abs=1e-6)


def test_concurrent_callers_agree():
    out = []

    def work():
        out.append(uninformed_for_size(250_000, NetworkParams(node_count=777)))

    threads = [threading.Thread(target=work) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(set(out)) == 1
