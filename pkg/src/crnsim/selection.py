"""Channel validity, cooperative-group enumeration and (group, channel) selection."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .metric import count_interference_fast, interference_term
from .model import NetworkState, SimConfig, iter_bits
from .radio import ChannelModel

SCORINGS = ("lc", "capacity_interference", "min_switch")


class UnreachableError(RuntimeError):
    """No candidate group can reach the receiver."""


@dataclass(frozen=True)
class SelectionResult:
    group: Tuple[int, ...]
    channel: int
    score: float
    fallback: bool
    capacity: float = 0.0
    nulled_pus: Tuple[int, ...] = ()
    t_switch: float = 0.0
    p_pu: float = 0.0


def valid_channel_mask(state: NetworkState, member: int,
                       exclude: Optional[Tuple[int, int]] = None) -> int:
    """Bitmask of channels on which ``member`` may send without preempting a flow."""
    su = state.sus[member]
    avail = 0
    for c in su.available_channels:
        avail |= 1 << c
    in_use = {ch for key, ch in state.sending_roles(member).items() if key != exclude}
    if not in_use:
        return avail
    if len(in_use) == 1:
        return avail & (1 << next(iter(in_use)))
    return 0


def is_valid_channel(state: NetworkState, member: int, channel: int,
                     exclude: Optional[Tuple[int, int]] = None) -> bool:
    """True iff the member carries no active flow, or all of them use ``channel``.

    ``exclude`` names a ``(flow, hop)`` role to ignore, used when a hop
    re-evaluates its own channel.
    """
    if channel not in state.sus[member].available_channels:
        raise ValueError(f"channel {channel} not available at node {member}")
    return bool(valid_channel_mask(state, member, exclude) >> channel & 1)


def helper_candidates(state: NetworkState, relay: int, receiver: int,
                      model: Optional[ChannelModel] = None,
                      max_helpers: Optional[int] = None) -> List[int]:
    """Common neighbours of relay and receiver, strongest toward the receiver first."""
    cap = state.config.max_helpers if max_helpers is None else max_helpers
    common = state.nbr_mask[relay] & state.nbr_mask[receiver]
    common &= ~((1 << relay) | (1 << receiver))
    cands = list(iter_bits(common))
    if model is not None:
        strength = (np.abs(model.su[:, cands, receiver]) ** 2).sum(axis=0) if cands else []
        order = sorted(range(len(cands)), key=lambda i: (-strength[i], cands[i]))
    else:
        order = sorted(range(len(cands)), key=lambda i: (state.su_dist[cands[i], receiver], cands[i]))
    return sorted(cands[i] for i in order[:cap])


@lru_cache(maxsize=None)
def _subset_masks(n_helpers: int, max_size: int) -> Tuple[int, ...]:
    masks = [1]
    for size in range(1, min(max_size - 1, n_helpers) + 1):
        for combo in combinations(range(1, n_helpers + 1), size):
            m = 1
            for i in combo:
                m |= 1 << i
            masks.append(m)
    return tuple(masks)


def enumerate_groups(state: NetworkState, relay: int, receiver: int, max_size: int,
                     model: Optional[ChannelModel] = None,
                     max_helpers: Optional[int] = None) -> List[Tuple[int, ...]]:
    """Candidate sending groups: ``(relay,)`` first, then relay plus helper subsets.

    Groups are ordered by size, then by helper combination order.
    """
    helpers = helper_candidates(state, relay, receiver, model, max_helpers)
    local = [relay] + helpers
    return [tuple(local[i] for i in iter_bits(m)) for m in _subset_masks(len(helpers), max(max_size, 1))]


def select(state: NetworkState, relay: int, receiver: int, model: ChannelModel,
           config: Optional[SimConfig] = None, *, channels: Optional[Sequence[int]] = None,
           scoring: str = "lc", max_size: Optional[int] = None,
           exclude: Optional[Tuple[int, int]] = None, overlay: bool = True) -> SelectionResult:
    """Pick the best (group, channel) for the hop ``relay -> receiver``.

    Every channel is checked against every candidate group; pairs valid for
    all members compete on their score, and only if none is valid does the
    pair with the smallest switching delay win (``fallback=True``).

    ``scoring`` selects the metric: ``"lc"`` uses the full routing metric,
    ``"capacity_interference"`` drops the PU and switching factors, and
    ``"min_switch"`` ranks valid channels by switching delay alone.

    With ``overlay`` (the default) every group, a lone relay included, must
    null the in-range PUs licensed on the channel, so a singleton next to
    such a PU has zero capacity. ``overlay=False`` models interweave access:
    singletons ignore PUs when scoring and wait for them to go quiet.
    """
    cfg = config or state.config
    if scoring not in SCORINGS:
        raise ValueError(f"unknown scoring {scoring!r}")
    if relay == receiver or not state.in_range[relay, receiver]:
        raise UnreachableError(f"{receiver} is not reachable from {relay}")
    size_cap = cfg.max_group_size if max_size is None else max_size

    helpers = helper_candidates(state, relay, receiver, model, cfg.max_helpers)
    members = [relay] + helpers
    n = len(members)
    subsets = _subset_masks(len(helpers), max(size_cap, 1))
    sizes = np.array([bin(m).count("1") for m in subsets])

    k = cfg.num_channels
    h = np.ascontiguousarray(model.su[:, members, receiver])
    reach = 0
    for m in members:
        reach |= state.pu_reach_mask[m]
    local_pus = list(iter_bits(reach))
    q = len(local_pus)
    if q:
        g = np.ascontiguousarray(model.pu[:, members][:, :, local_pus])
        inr = state.pu_in_range[np.ix_(members, local_pus)]
        on_ch = state.pu_channel[local_pus][None, :] == np.arange(k)[:, None]
        bits = inr[None, :, :] & on_ch[:, None, :]
        weights = (np.uint64(1) << np.arange(q, dtype=np.uint64))
        pu_mask = np.ascontiguousarray((bits * weights).sum(axis=2).astype(np.uint64))
        mu = np.array([state.pus[p].process.mu for p in local_pus], dtype=float)
    else:
        g = np.zeros((k, n, 0), dtype=complex)
        pu_mask = np.zeros((k, n), dtype=np.uint64)
        mu = np.zeros(0)

    cur = np.array([state.sus[m].current_send_channel for m in members], dtype=np.int64)
    valid = np.array([valid_channel_mask(state, m, exclude) for m in members], dtype=np.uint64)
    avail = np.array([_channel_mask(state.sus[m].available_channels) for m in members], dtype=np.uint64)
    recv_avail = _channel_mask(state.sus[receiver].available_channels)
    if channels is not None:
        recv_avail &= _channel_mask(channels)

    if scoring == "min_switch":
        interference = np.ones(len(subsets))
    else:
        interference = np.empty(len(subsets))
        for i, sub in enumerate(subsets):
            group = [members[j] for j in iter_bits(sub)]
            gmask = 0
            for v in group:
                gmask |= 1 << v
            n_n, n_f = count_interference_fast(state, gmask, group)
            interference[i] = interference_term(n_n, n_f, cfg.beta)

    snr_scale = state.sus[relay].max_power / (model.noise_density * model.bandwidth)
    capacity, ppu, tsw, score, flags = kernels.score_candidates(
        h, g, pu_mask, mu, cur, valid, avail, recv_avail,
        np.array(subsets, dtype=np.uint64), interference,
        snr_scale, model.bandwidth, cfg.tau, cfg.switch_cost_c,
        scoring == "lc", scoring in ("lc", "min_switch"), overlay)

    s_idx, ch_idx = np.nonzero(flags > 0)
    if s_idx.size == 0:
        raise UnreachableError(f"no channel usable by any group for {relay} -> {receiver}")
    is_valid = flags[s_idx, ch_idx] == 2
    cap = capacity[s_idx, ch_idx]
    sw = tsw[s_idx, ch_idx]
    sz = sizes[s_idx]
    if is_valid.any():
        keep = np.flatnonzero(is_valid)
        s_idx, ch_idx, cap, sw, sz = s_idx[keep], ch_idx[keep], cap[keep], sw[keep], sz[keep]
        if scoring == "min_switch":
            order = np.lexsort((s_idx, ch_idx, -cap, sw))
        else:
            sc = score[s_idx, ch_idx]
            order = np.lexsort((s_idx, ch_idx, sz, -cap, -sc))
        fallback = False
    else:
        # an infeasible pair cannot carry data; keep it only if nothing else exists
        if (cap > 0).any():
            keep = np.flatnonzero(cap > 0)
            s_idx, ch_idx, cap, sw, sz = s_idx[keep], ch_idx[keep], cap[keep], sw[keep], sz[keep]
        order = np.lexsort((s_idx, sz, ch_idx, -cap, sw))
        fallback = True
    best = order[0]
    s, ch = int(s_idx[best]), int(ch_idx[best])
    group = tuple(members[j] for j in iter_bits(subsets[s]))
    if len(group) >= 2 or overlay:
        nulled = tuple(local_pus[j] for j in iter_bits(_or_reduce(pu_mask[ch], subsets[s])))
    else:
        nulled = ()
    return SelectionResult(group=group, channel=ch, score=float(score[s, ch]), fallback=fallback,
                           capacity=float(capacity[s, ch]), nulled_pus=nulled,
                           t_switch=float(tsw[s, ch]), p_pu=float(ppu[s, ch]))


def _or_reduce(row: np.ndarray, subset: int) -> int:
    out = 0
    for j in iter_bits(subset):
        out |= int(row[j])
    return out


def _channel_mask(channels) -> int:
    m = 0
    for c in channels:
        m |= 1 << int(c)
    return m


def nulled_for(state: NetworkState, group: Sequence[int], channel: int,
               overlay: bool = True) -> Tuple[int, ...]:
    """PUs a group must null on ``channel``: in range of a member and licensed there."""
    if len(group) < 2 and not overlay:
        return ()
    reach = 0
    for m in group:
        reach |= state.pu_reach_mask[m]
    return tuple(p for p in iter_bits(reach) if state.pus[p].channel == channel)


def sensed_pus(state: NetworkState, group: Sequence[int], channel: int) -> Tuple[int, ...]:
    reach = 0
    for m in group:
        reach |= state.pu_reach_mask[m]
    return tuple(p for p in iter_bits(reach) if state.pus[p].channel == channel)
