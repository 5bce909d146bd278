"""The cooperative routing metric and its interference and switching terms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .model import NetworkState, SecondaryUser

EPS_P = 1e-3
EPS_T = 1e-4


@dataclass(frozen=True)
class MetricInputs:
    capacity: float
    n_n: int
    n_f: int
    beta: float
    p_pu: float
    t_switch: float

    def __post_init__(self):
        if not self.n_f >= self.n_n >= 0:
            raise ValueError("need n_f >= n_n >= 0")
        if self.capacity < 0 or self.t_switch < 0 or not 0 <= self.p_pu <= 1:
            raise ValueError("capacity, t_switch must be >= 0 and p_pu in [0, 1]")


def interference_term(n_n: int, n_f: int, beta: float) -> float:
    return max(n_n + beta * (n_f - n_n), 1.0)


def lc_metric(inputs: MetricInputs) -> float:
    """Capacity divided by interference, PU exposure and switching cost.

    Each denominator factor is floored so the score stays finite when there
    are no flows, no PUs or no switching.
    """
    return inputs.capacity / (
        interference_term(inputs.n_n, inputs.n_f, inputs.beta)
        * max(inputs.p_pu, EPS_P)
        * max(inputs.t_switch, EPS_T)
    )


def count_interference(state: NetworkState, group: Sequence[int]) -> Tuple[int, int]:
    """Return ``(n_n, n_f)`` for a candidate group by direct geometry.

    ``n_n`` counts non-member neighbours of the group that take part in an
    active flow; ``n_f`` counts active flows with a path node inside
    interference range of a member. ``n_f`` is raised to ``n_n`` when the
    neighbours outnumber the flows they carry.
    """
    if len(group) == 0:
        raise ValueError("empty group")
    cfg = state.config
    members = set(group)
    pos = state.su_pos
    carriers = set()
    flows_near = 0
    for f in state.flows:
        if not f.active:
            continue
        for ms in f.hop_members.values():
            carriers.update(ms)
        carriers.update(f.hop_receivers.values())
        near = False
        for p in f.path_nodes():
            for m in group:
                if np.hypot(*(pos[p] - pos[m])) <= cfg.interference_range:
                    near = True
                    break
            if near:
                break
        flows_near += near
    n_n = 0
    for v in carriers:
        if v in members:
            continue
        if any(np.hypot(*(pos[v] - pos[m])) <= cfg.su_range for m in group):
            n_n += 1
    return n_n, max(flows_near, n_n)


def count_interference_fast(state: NetworkState, group_mask: int, members: Sequence[int]) -> Tuple[int, int]:
    nbr = 0
    reach = 0
    masks = state.flow_reach_masks()
    for m in members:
        nbr |= state.nbr_mask[m]
        reach |= masks[m]
    n_n = bin(nbr & state.carrying_mask() & ~group_mask).count("1")
    n_f = bin(reach).count("1")
    return n_n, max(n_f, n_n)


def switching_delay(group: Sequence[SecondaryUser], target: int, c: float) -> float:
    """Delay for every member to retune to ``target``: the farthest one dominates."""
    return c * max(abs(m.current_send_channel - target) for m in group)
