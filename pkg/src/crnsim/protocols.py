"""Route discovery, Hello exchange and periodic channel re-selection.

Three variants share the machinery:

* ``CSCR`` - cooperative groups with channel-aware selection on every channel.
* ``UNDERCOVER`` - cooperative groups on one random channel per relay, metric
  without PU and switching factors.
* ``LAUNCH`` - single senders, least-switching valid channel, interweave
  access and locked channels.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .model import NetworkState, iter_bits
from .radio import ChannelModel
from .selection import SelectionResult, UnreachableError, select


class Protocol(str, enum.Enum):
    CSCR = "CSCR"
    UNDERCOVER = "UNDERCOVER"
    LAUNCH = "LAUNCH"

    @property
    def cooperative(self) -> bool:
        return self is not Protocol.LAUNCH

    @classmethod
    def parse(cls, name: str) -> "Protocol":
        try:
            return cls(name.strip().upper())
        except ValueError:
            raise ValueError(f"unknown protocol {name!r}") from None


class RouteFailure(RuntimeError):
    pass


@dataclass
class ControlCounters:
    hello: int = 0
    rreq: int = 0
    rrep: int = 0
    group: int = 0

    @property
    def total(self) -> int:
        return self.hello + self.rreq + self.rrep + self.group


@dataclass(frozen=True)
class NeighborEntry:
    node: int
    available_channels: Tuple[int, ...]
    coefficients: Tuple[complex, ...]


@dataclass(frozen=True)
class SensedPu:
    pu: int
    mu: float
    channel: int
    coefficient: complex


@dataclass(frozen=True)
class HelloPayload:
    sender: int
    time: float
    neighbor_table: Tuple[NeighborEntry, ...]
    flow_table: Tuple[Tuple[int, int], ...]
    sensed_pus: Tuple[SensedPu, ...]


@dataclass
class Knowledge:
    """What each SU has heard: ``tables[receiver][sender]`` is the latest Hello."""

    tables: Dict[int, Dict[int, HelloPayload]] = field(default_factory=dict)
    emissions: int = 0


def make_hello(state: NetworkState, model: ChannelModel, sender: int, now: float) -> HelloPayload:
    nbrs = []
    for v in iter_bits(state.nbr_mask[sender]):
        nbrs.append(NeighborEntry(
            node=v,
            available_channels=tuple(sorted(state.sus[v].available_channels)),
            coefficients=tuple(complex(c) for c in model.su[:, v, sender])))
    flows = sorted({(fid, ch) for (fid, _), ch in state.sending_roles(sender).items()})
    pus = []
    for p in iter_bits(state.pu_reach_mask[sender]):
        pu = state.pus[p]
        for ch in sorted(pu.active_channels):
            pus.append(SensedPu(pu=p, mu=pu.process.mu, channel=ch,
                                coefficient=complex(model.pu[ch, sender, p])))
    return HelloPayload(sender=sender, time=now, neighbor_table=tuple(nbrs),
                        flow_table=tuple(flows), sensed_pus=tuple(pus))


def exchange_hello(state: NetworkState, model: ChannelModel, knowledge: Knowledge, now: float,
                   counters: Optional[ControlCounters] = None) -> Knowledge:
    """Every SU broadcasts one Hello on the control channel; neighbours store it."""
    for s in range(len(state.sus)):
        payload = make_hello(state, model, s, now)
        knowledge.emissions += 1
        if counters is not None:
            counters.hello += 1
        for r in iter_bits(state.nbr_mask[s]):
            knowledge.tables.setdefault(r, {})[s] = payload
    return knowledge


@dataclass(frozen=True)
class Hop:
    sender: int
    selection: SelectionResult
    receiver: int
    available_at: float = 0.0


@dataclass(frozen=True)
class RouteEntry:
    flow: int
    hops: Tuple[Hop, ...]
    established_at: float
    protocol: Protocol = Protocol.CSCR

    @property
    def bottleneck(self) -> float:
        return min(h.selection.score for h in self.hops)

    def path(self) -> List[int]:
        return [h.sender for h in self.hops] + [self.hops[-1].receiver]

    def check_chain(self) -> None:
        for a, b in zip(self.hops, self.hops[1:]):
            if a.receiver != b.sender:
                raise AssertionError(f"hop chain broken at {a.receiver} -> {b.sender}")
        for h in self.hops:
            if h.sender not in h.selection.group:
                raise AssertionError(f"sender {h.sender} missing from its group")


def hop_selection(state: NetworkState, model: ChannelModel, sender: int, receiver: int,
                  protocol: Protocol, channel: Optional[int] = None,
                  exclude: Optional[Tuple[int, int]] = None) -> SelectionResult:
    if protocol is Protocol.CSCR:
        return select(state, sender, receiver, model, exclude=exclude)
    if protocol is Protocol.UNDERCOVER:
        return select(state, sender, receiver, model, channels=[channel],
                      scoring="capacity_interference", exclude=exclude)
    return select(state, sender, receiver, model, max_size=1, scoring="min_switch", exclude=exclude,
                  overlay=False)


def _hop_distances(state: NetworkState, source: int, ttl: int) -> Dict[int, int]:
    dist = {source: 0}
    frontier = [source]
    for d in range(1, ttl + 1):
        nxt = []
        for u in frontier:
            for v in iter_bits(state.nbr_mask[u]):
                if v not in dist:
                    dist[v] = d
                    nxt.append(v)
        frontier = sorted(nxt)
    return dist


def discover_route(state: NetworkState, model: ChannelModel, source: int, dest: int,
                   protocol: Protocol, *, rng: Optional[np.random.Generator] = None,
                   counters: Optional[ControlCounters] = None, now: float = 0.0,
                   flow_id: int = -1) -> RouteEntry:
    """Flood a route request and return the widest (max-min score) path.

    Every SU within ``ttl - 1`` hops rebroadcasts the request once and scores
    its hop toward each neighbour that heard it. The destination keeps the
    path with the largest bottleneck score, fewer hops on ties.
    """
    if source == dest:
        raise ValueError("source equals destination")
    protocol = Protocol(protocol)
    ttl = state.config.ttl
    dist = _hop_distances(state, source, ttl)
    relays = sorted(u for u, d in dist.items() if d <= ttl - 1 and u != dest)
    if counters is not None:
        counters.rreq += len(relays)

    channel_of = {}
    if protocol is Protocol.UNDERCOVER:
        if rng is None:
            raise ValueError("UNDERCOVER discovery needs an rng")
        for u in relays:
            channel_of[u] = int(rng.choice(sorted(state.sus[u].available_channels)))

    edges: Dict[int, List[Tuple[int, SelectionResult]]] = {}
    for u in relays:
        out = []
        for v in iter_bits(state.nbr_mask[u]):
            if v == source:
                continue
            try:
                sel = hop_selection(state, model, u, v, protocol, channel_of.get(u))
            except UnreachableError:
                continue
            if sel.score > 0:
                out.append((v, sel))
        edges[u] = out

    layer = {source: float("inf")}
    parents: List[Dict[int, Tuple[int, SelectionResult]]] = [{}]
    best_val, best_h = -1.0, None
    for h in range(1, ttl + 1):
        nxt: Dict[int, float] = {}
        par: Dict[int, Tuple[int, SelectionResult]] = {}
        for u in sorted(layer):
            if u not in edges:
                continue
            bu = layer[u]
            for v, sel in edges[u]:
                val = min(bu, sel.score)
                if val > nxt.get(v, -1.0):
                    nxt[v] = val
                    par[v] = (u, sel)
        parents.append(par)
        if dest in nxt and nxt[dest] > best_val:
            best_val, best_h = nxt[dest], h
        layer = nxt
        if not layer:
            break
    if best_h is None:
        raise RouteFailure(f"no route from {source} to {dest} within {ttl} hops")

    hops = []
    v = dest
    for h in range(best_h, 0, -1):
        u, sel = parents[h][v]
        hops.append(Hop(sender=u, selection=sel, receiver=v, available_at=now + sel.t_switch))
        v = u
    hops.reverse()
    route = RouteEntry(flow=flow_id, hops=tuple(hops), established_at=now, protocol=protocol)
    if counters is not None:
        counters.rrep += len(hops)
        if protocol.cooperative:
            counters.group += sum(len(hp.selection.group) for hp in hops)
    return route


def install_route(state: NetworkState, route: RouteEntry) -> None:
    """Record the route's hops on its flow and retune the senders."""
    flow = state.flows[route.flow]
    state.clear_route(route.flow)
    for i, hop in enumerate(route.hops):
        _apply_hop(state, route.flow, i, hop)
    flow.active = True
    state.touch()


def _apply_hop(state: NetworkState, flow_id: int, index: int, hop: Hop) -> None:
    sel = hop.selection
    state.set_hop(flow_id, index, sel.group, hop.receiver, sel.channel)
    for m in sel.group:
        state.sus[m].current_send_channel = sel.channel


def reselect_channels(state: NetworkState, model: ChannelModel, route: RouteEntry, now: float,
                      counters: Optional[ControlCounters] = None) -> RouteEntry:
    """Re-run selection for every hop of a CSCR route.

    A hop whose group or channel changes is unusable until its members have
    switched. Baselines keep their discovery-time choice.
    """
    if route.protocol is not Protocol.CSCR:
        return route
    hops = list(route.hops)
    for i, hop in enumerate(hops):
        sel = select(state, hop.sender, hop.receiver, model, exclude=(route.flow, i))
        old = hop.selection
        if sel.group == old.group and sel.channel == old.channel:
            continue
        if sel.capacity <= 0:
            # nothing usable right now; keep the working choice
            continue
        hops[i] = Hop(sender=hop.sender, selection=sel, receiver=hop.receiver,
                      available_at=now + sel.t_switch)
        _apply_hop(state, route.flow, i, hops[i])
        if counters is not None:
            counters.group += len(sel.group)
    return replace(route, hops=tuple(hops))
