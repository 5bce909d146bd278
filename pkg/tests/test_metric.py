import pytest
from hypothesis import assume, given, settings, strategies as st

from builders import activate, make_state
from crnsim.metric import (EPS_P, EPS_T, MetricInputs, count_interference, count_interference_fast,
                           interference_term, lc_metric, switching_delay)
from crnsim.model import _mask
from oracles import lc_oracle


def test_zero_capacity():
    assert lc_metric(MetricInputs(0.0, 2, 4, 0.5, 0.5, 0.002)) == 0.0


def test_worked_value():
    v = lc_metric(MetricInputs(1e6, 2, 4, 0.5, 0.5, 0.002))
    assert v == pytest.approx(1e6 / (3 * 0.5 * 0.002), rel=1e-14)
    assert v == pytest.approx(3.333e8, rel=1e-3)


def test_lower_ppu_wins():
    a = lc_metric(MetricInputs(5e5, 1, 2, 0.5, 0.2, 0.001))
    b = lc_metric(MetricInputs(5e5, 1, 2, 0.5, 0.8, 0.001))
    assert a > b


def test_floors():
    v = lc_metric(MetricInputs(1e6, 0, 0, 0.5, 0.0, 0.0))
    assert v == pytest.approx(1e6 / (EPS_P * EPS_T))


def test_inputs_invariant():
    with pytest.raises(ValueError):
        MetricInputs(1.0, 3, 2, 0.5, 0.1, 0.1)


inputs = st.builds(
    lambda cap, nn, extra, beta, p, t: MetricInputs(cap, nn, nn + extra, beta, p, t),
    st.floats(0, 1e8), st.integers(0, 20), st.integers(0, 20), st.floats(1e-3, 1.0),
    st.floats(0, 1), st.floats(0, 0.05))


@settings(max_examples=300, deadline=None)
@given(inputs)
def test_matches_oracle(x):
    assert lc_metric(x) == pytest.approx(lc_oracle(x.capacity, x.n_n, x.n_f, x.beta, x.p_pu, x.t_switch),
                                         rel=1e-12, abs=0)


@settings(max_examples=300, deadline=None)
@given(inputs, st.floats(1e-3, 1e8), st.integers(0, 5), st.floats(0, 1), st.floats(0, 0.05))
def test_monotone(x, dcap, dn, dp, dt):
    base = lc_metric(x)
    bigger = MetricInputs(x.capacity * (1 + 1e-9) + dcap, x.n_n, x.n_f, x.beta, x.p_pu, x.t_switch)
    assert lc_metric(bigger) > base
    assert lc_metric(MetricInputs(x.capacity, x.n_n, x.n_f + dn, x.beta, x.p_pu, x.t_switch)) <= base
    assert lc_metric(MetricInputs(x.capacity, x.n_n + dn, x.n_f + dn, x.beta, x.p_pu, x.t_switch)) <= base
    assert lc_metric(MetricInputs(x.capacity, x.n_n, x.n_f, x.beta, max(x.p_pu, dp), x.t_switch)) <= base
    assert lc_metric(MetricInputs(x.capacity, x.n_n, x.n_f, x.beta, x.p_pu, x.t_switch + dt)) <= base


@settings(max_examples=100, deadline=None)
@given(st.lists(inputs, min_size=2, max_size=8), st.floats(1e-3, 1e3))
def test_ranking_invariant_under_scaling(xs, k):
    scores = [lc_metric(x) for x in xs]
    scaled = [lc_metric(MetricInputs(x.capacity * k, x.n_n, x.n_f, x.beta, x.p_pu, x.t_switch)) for x in xs]
    assume(len(set(scores)) == len(scores))
    assert scores.index(max(scores)) == scaled.index(max(scaled))


def test_interference_term_floor():
    assert interference_term(0, 0, 0.5) == 1.0
    assert interference_term(2, 4, 0.5) == 3.0


class _Su:
    def __init__(self, ch):
        self.current_send_channel = ch


def test_switching_examples():
    assert switching_delay([_Su(2), _Su(2)], 2, 1e-3) == 0.0
    assert switching_delay([_Su(1), _Su(3)], 5, 1e-3) == pytest.approx(4e-3)
    assert switching_delay([_Su(0)], 9, 1e-3) == pytest.approx(9e-3)


def test_no_flows_no_interference():
    state = make_state([(0, 0), (50, 0), (100, 0)], flows=[(0, 2)])
    assert count_interference(state, [0]) == (0, 0)


def test_single_flow_through_neighbour():
    # group {0}; flow 1 -> 2 relayed by node 1, which neighbours 0
    state = make_state([(0, 0), (100, 0), (200, 0)], flows=[(1, 2)])
    activate(state, 0, [((1,), 2, 0)])
    assert count_interference(state, [0]) == (1, 1)


def test_three_flows_mixed_distance():
    # group {0} at the origin; su_range 125, interference range 250
    pos = [(0, 0), (100, 0), (400, 0),    # flow 0 relayed by neighbour 1, ends far away
           (200, 0), (200, 100),          # flow 1 wholly at 200-225 m: near, not neighbour
           (900, 900), (1000, 900)]       # flow 2 far away
    state = make_state(pos, flows=[(1, 2), (3, 4), (5, 6)])
    activate(state, 0, [((1,), 2, 0)])
    activate(state, 1, [((3,), 4, 1)])
    activate(state, 2, [((5,), 6, 2)])
    # brute force: n_n counts carriers within 125 m; n_f flows with any node within 250 m
    assert count_interference(state, [0]) == (1, 2)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_fast_count_matches_geometry(seed):
    import numpy as np
    rng = np.random.default_rng(seed)
    n = 12
    pos = rng.uniform(0, 400, size=(n, 2))
    state = make_state(pos, flows=[(0, 1), (2, 3), (4, 5)])
    for f in range(3):
        if rng.random() < 0.7:
            a, b = rng.choice(n, 2, replace=False)
            activate(state, f, [((int(a),), int(b), 0)])
    for _ in range(5):
        size = int(rng.integers(1, 4))
        group = sorted(int(x) for x in rng.choice(n, size, replace=False))
        assert count_interference_fast(state, _mask(group), group) == count_interference(state, group)
