"""Hand-built networks for tests."""

import numpy as np

from crnsim.activity import PuProcess
from crnsim.model import Flow, NetworkState, PrimaryUser, SecondaryUser, SimConfig
from crnsim.radio import sample_coefficients


def make_state(positions, pus=(), flows=(), channels=5, current=None, **overrides):
    """Hand-placed network.

    ``pus`` holds ``(x, y, channel, mu, on)`` tuples and ``flows`` holds
    ``(source, destination)`` pairs.
    """
    cfg = SimConfig(num_sus=len(positions), num_pus=len(pus), num_channels=channels,
                    num_flows=len(flows), **overrides)
    sus = [SecondaryUser(id=i, position=tuple(map(float, p)), tx_range=cfg.su_range,
                         current_send_channel=0 if current is None else current[i],
                         available_channels=frozenset(range(channels)), max_power=cfg.max_power)
           for i, p in enumerate(positions)]
    pu_objs = []
    for j, (x, y, ch, mu, on) in enumerate(pus):
        proc = PuProcess(mu=mu, lambda_on=1.0, on=on, next_transition=1e9)
        pu_objs.append(PrimaryUser(id=j, position=(float(x), float(y)), tx_range=cfg.pu_range,
                                   active_channels=frozenset({ch}), process=proc))
    flow_objs = [Flow(id=i, source=s, destination=d, rate=cfg.data_rate) for i, (s, d) in enumerate(flows)]
    return NetworkState(cfg, sus, pu_objs, flow_objs)


def activate(state, flow_id, hops):
    """Give a flow an active route; ``hops`` is a list of (members, receiver, channel)."""
    for i, (members, receiver, ch) in enumerate(hops):
        state.set_hop(flow_id, i, tuple(members), receiver, ch)
    state.flows[flow_id].active = True
    state.touch()


def random_instance(rng, fallback=False):
    """Up to 6 SUs in a 120 m square (so almost all are neighbours), up to 4 channels.

    Relay is node 0 and receiver node 1. With ``fallback`` every node carries
    two flows on different channels, so no channel is valid anywhere.
    """
    n = int(rng.integers(2, 7))
    k = int(rng.integers(1, 5))
    q = int(rng.integers(0, 5))
    pos = rng.uniform(0, 120, size=(n, 2))
    pus = [(float(x), float(y), int(rng.integers(k)), float(rng.uniform(0.2, 3)), False)
           for x, y in rng.uniform(-60, 180, size=(q, 2))]
    current = [int(c) for c in rng.integers(0, k, n)]
    flows = [(0, 1), (1, 0), (0, 1), (1, 0)]
    state = make_state(pos, pus=pus, flows=flows, channels=k, current=current, max_helpers=5)
    for f in range(4):
        if fallback or rng.random() < 0.5:
            members = tuple(range(n)) if fallback else tuple(sorted(set(int(x) for x in rng.choice(n, 2))))
            ch = (f % 2) if fallback and k > 1 else int(rng.integers(k))
            activate(state, f, [(members, int(rng.integers(n)), ch)])
    model = sample_coefficients(state, rng)
    return state, model, 0, 1
