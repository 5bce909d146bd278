import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from builders import make_state
from crnsim.engine import seed_streams
from crnsim.model import ConfigError, SimConfig, UnknownNodeError, build_topology, euclidean, neighbors


def test_nominal_cardinalities():
    cfg = SimConfig(num_sus=25, num_pus=8, num_channels=5, num_flows=8, area_side=250, rng_seed=42)
    state = build_topology(cfg, np.random.default_rng(42))
    assert (len(state.sus), len(state.pus), len(state.flows)) == (25, 8, 8)
    assert all(s.available_channels == frozenset(range(5)) for s in state.sus)
    assert all(len(p.active_channels) == 1 for p in state.pus)
    assert all(f.source != f.destination for f in state.flows)
    assert np.all((state.su_pos >= 0) & (state.su_pos <= 250))


def test_empty_state_is_valid():
    cfg = SimConfig(num_sus=0, num_pus=0, num_channels=1, num_flows=0)
    state = build_topology(cfg, np.random.default_rng(0))
    assert state.sus == [] and state.pus == [] and state.flows == []
    assert state.serialize()


def test_same_seed_gives_identical_state():
    cfg = SimConfig()
    a = build_topology(cfg, seed_streams(7)["topology"])
    b = build_topology(cfg, seed_streams(7)["topology"])
    assert a.serialize() == b.serialize()
    c = build_topology(cfg, seed_streams(8)["topology"])
    assert a.serialize() != c.serialize()


def test_flows_need_two_sus():
    with pytest.raises(ConfigError):
        build_topology(SimConfig(num_sus=1, num_flows=1), np.random.default_rng(0))


@pytest.mark.parametrize("field,value", [("beta", 0.0), ("beta", 1.5), ("pu_activity", 1.0),
                                         ("num_sus", -1), ("sim_duration", 0.0), ("tau", -0.1)])
def test_config_invariants(field, value):
    with pytest.raises(ConfigError):
        SimConfig(**{field: value}).validate()


def test_per_node_channel_subsets():
    cfg = SimConfig(channels_per_node=3)
    state = build_topology(cfg, np.random.default_rng(1))
    assert all(len(s.available_channels) == 3 for s in state.sus)
    assert all(s.current_send_channel in s.available_channels for s in state.sus)


def test_neighbors_within_range():
    state = make_state([(0, 0), (100, 0)])
    assert neighbors(state, 0) == {1} and neighbors(state, 1) == {0}


def test_neighbors_out_of_range():
    state = make_state([(0, 0), (200, 0)])
    assert neighbors(state, 0) == set() and neighbors(state, 1) == set()


def test_collinear_chain():
    pos = [(0, 0), (100, 0), (200, 0)]
    state = make_state(pos)
    # brute-force distance check
    for n in range(3):
        expected = {m for m in range(3) if m != n and euclidean(pos[n], pos[m]) <= 125}
        assert neighbors(state, n) == expected
    assert [len(neighbors(state, n)) for n in range(3)] == [1, 2, 1]


def test_unknown_node():
    state = make_state([(0, 0)])
    with pytest.raises(UnknownNodeError):
        neighbors(state, 5)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(2, 30))
def test_neighbor_symmetry(seed, n):
    state = build_topology(SimConfig(num_sus=n, num_flows=1), np.random.default_rng(seed))
    for a in range(n):
        for b in neighbors(state, a):
            assert a in neighbors(state, b)
