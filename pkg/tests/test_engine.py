import copy

import numpy as np
import pytest

from builders import make_state
from crnsim.engine import (COLLIDED, DELIVERED, EventQueue, RawResults, audit_overlay, collect,
                           conservation_holds, run)
from crnsim.experiments import make_network
from crnsim.model import SimConfig
from crnsim.protocols import ControlCounters, Protocol
from crnsim.radio import sample_coefficients


def _model(state, seed=0):
    return sample_coefficients(state, np.random.default_rng(seed))


def test_event_queue_order():
    q = EventQueue()
    q.push(2.0, "a", 0)
    q.push(1.0, "b", 0)
    q.push(1.0, "c", 0)
    assert [q.pop()[2] for _ in range(3)] == ["b", "c", "a"]
    with pytest.raises(ValueError):
        q.push(0.5, "late", 0)


def test_uncontended_link_delivers_demand():
    state = make_state([(0, 0), (50, 0)], flows=[(0, 1)], sim_duration=10.0, flow_start_window=1e-6)
    raw = run(state, _model(state), protocol=Protocol.CSCR, seed=1)
    r = collect(raw)
    assert r.pdr >= 0.995
    assert r.goodput_bps == pytest.approx(100e3, rel=0.01)
    assert conservation_holds(raw)


@pytest.mark.parametrize("proto", [Protocol.LAUNCH, Protocol.CSCR])
def test_permanent_pu_blocks_singleton(proto):
    state = make_state([(0, 0), (50, 0)], flows=[(0, 1)], channels=1, sim_duration=5.0,
                       pus=[(25, 40, 0, 1.0, True)])
    raw = run(state, _model(state), protocol=proto, seed=1)
    r = collect(raw)
    assert r.goodput_bps == 0.0 and r.delivered == 0
    assert r.generated > 0 and conservation_holds(raw)


def test_crossing_flows_collide():
    # one channel, four nodes all within interference range, two flows
    state = make_state([(0, 0), (60, 0), (0, 60), (60, 60)], flows=[(0, 1), (2, 3)], channels=1,
                       sim_duration=5.0, data_rate=400e3, max_group_size=1, flow_start_window=1e-9)
    raw = run(state, _model(state), protocol=Protocol.CSCR, seed=3)
    r = collect(raw)
    assert r.collisions > 0 and r.pdr < 1.0
    # replay: each collided attempt overlaps another same-channel attempt in time
    for a in raw.attempts:
        if a.outcome == COLLIDED:
            assert any(b is not a and b.channel == a.channel and b.start < a.end and a.start < b.end
                       for b in raw.attempts)


def _raw(generated, delivered, duration=10.0, members=()):
    from crnsim.engine import TransmissionAttempt
    cfg = SimConfig(sim_duration=duration, packet_size=512)
    attempts = [TransmissionAttempt(0, i, 0, m, 9, 0, (), 0, 1, 4096, outcome=DELIVERED)
                for i, m in enumerate(members)]
    return RawResults(config=cfg, protocol=Protocol.CSCR, generated=[generated], delivered=[delivered],
                      dropped={"no-route": [generated - delivered]}, in_flight=[0], delays=[0.1] * delivered,
                      airtimes=[0.01] * delivered, delivered_bits=delivered * 4096, attempts=attempts,
                      pu_on_intervals={}, counters=ControlCounters(), route_failures=0,
                      selections_per_flow=[1], routes={}, trace_hash="")


def test_collect_zero_generated():
    r = collect(_raw(0, 0))
    assert r.goodput_bps == 0.0 and r.pdr == 1.0 and r.pdr_zero_sample


def test_collect_arithmetic():
    r = collect(_raw(100, 80))
    assert r.pdr == pytest.approx(0.8)
    assert r.goodput_bps == pytest.approx(32768.0)


def test_collect_singletons():
    assert collect(_raw(3, 3, members=[(1,), (2,), (3,)])).group_size == 1.0


def test_no_flows_run():
    state = make_state([(0, 0), (50, 0)], sim_duration=2.0)
    r = collect(run(state, _model(state), seed=0))
    assert r.pdr_zero_sample and r.goodput_bps == 0.0


@pytest.mark.parametrize("proto", list(Protocol))
@pytest.mark.parametrize("seed", [1, 2])
def test_invariants_on_nominal_runs(proto, seed):
    cfg = SimConfig(sim_duration=5.0)
    state, model = make_network(cfg, seed)
    raw = run(copy.deepcopy(state), model, protocol=proto, seed=seed)
    assert conservation_holds(raw)
    assert audit_overlay(state, raw) == []
    assert all(d >= a - 1e-12 for d, a in zip(raw.delays, raw.airtimes))
    delivered = [a for a in raw.attempts if a.outcome == DELIVERED]
    for a in delivered:
        assert a.end > a.start


def test_determinism_and_trace_hash():
    cfg = SimConfig(sim_duration=4.0)
    out = []
    for _ in range(2):
        state, model = make_network(cfg, 9)
        out.append(run(state, model, protocol=Protocol.CSCR, seed=9, trace=True))
    assert out[0].trace_hash == out[1].trace_hash
    assert out[0].trace == out[1].trace
    assert collect(out[0]) == collect(out[1])
    state, model = make_network(cfg, 10)
    assert run(state, model, protocol=Protocol.CSCR, seed=10).trace_hash != out[0].trace_hash


def test_trace_lines_are_tab_separated():
    state, model = make_network(SimConfig(sim_duration=2.0), 3)
    raw = run(state, model, seed=3, trace=True)
    assert raw.trace and all(len(line.split("\t")) == 4 for line in raw.trace)


def test_audit_catches_exposed_delivery():
    state = make_state([(0, 0), (50, 0)], flows=[(0, 1)], channels=1, sim_duration=2.0,
                       pus=[(25, 40, 0, 1.0, False)])
    raw = run(state, _model(state), protocol=Protocol.LAUNCH, seed=1)
    assert audit_overlay(state, raw) == []
    # pretend the PU was on the whole time: every delivery now violates overlay
    raw.pu_on_intervals[0] = [(0.0, 2.0)]
    assert len(audit_overlay(state, raw)) == sum(a.outcome == DELIVERED for a in raw.attempts) > 0
