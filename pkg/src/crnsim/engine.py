"""Deterministic discrete-event loop, abstract MAC and metric collection.

The MAC is deliberately coarse: a hop transmission occupies every group
member for ``packet_bits / capacity`` seconds after any channel switch, and
two same-channel transmissions whose sender sets reach each other's
receivers within interference range both fail (ALOHA-style) and retry after
a uniform backoff. Overlay access: a transmission may proceed only if every
in-range PU licensed on its channel is either nulled by the group or
currently OFF.
"""

from __future__ import annotations

import hashlib
import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .activity import advance
from .model import NetworkState, SimConfig, iter_bits
from .protocols import (ControlCounters, Knowledge, Protocol, RouteEntry, RouteFailure,
                        discover_route, exchange_hello, install_route, reselect_channels)
from .radio import ChannelModel

EVENT_KINDS = (
    "packet-arrival", "transmission-start", "transmission-end", "pu-transition",
    "hello-timer", "reselect-timer", "discovery-step", "retry",
)

DELIVERED = "delivered"
BLOCKED = "blocked-by-pu"
COLLIDED = "collided"
OVERFLOW = "dropped-queue-overflow"


class EventQueue:
    """Heap of ``(time, sequence, kind, actor, data)`` tuples."""

    def __init__(self):
        self._heap: list = []
        self._seq = 0
        self.last = -math.inf

    def __len__(self):
        return len(self._heap)

    def push(self, time: float, kind: str, actor: int, data=None) -> int:
        if time < self.last:
            raise ValueError(f"event at {time} scheduled in the past (now={self.last})")
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._heap, (time, seq, kind, actor, data))
        return seq

    def peek_time(self) -> float:
        return self._heap[0][0]

    def pop(self):
        ev = heapq.heappop(self._heap)
        self.last = ev[0]
        return ev


@dataclass
class Packet:
    flow: int
    seq: int
    created: float
    hop: int = 0
    retries: int = 0
    airtime: float = 0.0


@dataclass
class TransmissionAttempt:
    flow: int
    seq: int
    hop: int
    members: Tuple[int, ...]
    receiver: int
    channel: int
    nulled: Tuple[int, ...]
    start: float
    end: float
    bits: int
    outcome: str = ""
    collided: bool = False
    blocked: bool = False
    exposed: Tuple[int, ...] = ()


@dataclass
class _HopState:
    flow: int
    index: int
    sender: int
    members: Tuple[int, ...]
    receiver: int
    channel: int
    capacity: float
    nulled: Tuple[int, ...]
    exposed: Tuple[int, ...]
    available_at: float
    tx_time: float


@dataclass
class RawResults:
    config: SimConfig
    protocol: Protocol
    generated: List[int]
    delivered: List[int]
    dropped: Dict[str, List[int]]
    in_flight: List[int]
    delays: List[float]
    airtimes: List[float]
    delivered_bits: int
    attempts: List[TransmissionAttempt]
    pu_on_intervals: Dict[int, List[Tuple[float, float]]]
    counters: ControlCounters
    route_failures: int
    selections_per_flow: List[int]
    routes: Dict[int, RouteEntry]
    trace_hash: str
    trace: Optional[List[str]] = None
    events: int = 0


@dataclass
class MetricsReport:
    goodput_bps: float
    delay_s: float
    pdr: float
    pdr_zero_sample: bool
    group_size: float
    overhead_pkts: int
    generated: int
    delivered: int
    dropped: int
    collisions: int
    route_failures: int
    groups_per_flow: float


def seed_streams(seed: int) -> Dict[str, np.random.Generator]:
    """Independent named RNG streams derived from one seed."""
    names = ("topology", "channel", "pu", "traffic", "mac", "protocol")
    children = np.random.SeedSequence(int(seed) & (2 ** 64 - 1)).spawn(len(names))
    return {name: np.random.Generator(np.random.PCG64(ss)) for name, ss in zip(names, children)}


class Simulation:
    """One run of one protocol over a prepared network."""

    def __init__(self, state: NetworkState, model: ChannelModel, protocol, seed: Optional[int] = None,
                 trace: bool = False):
        self.state = state
        self.model = model
        self.cfg = state.config
        self.protocol = Protocol(protocol)
        seed = self.cfg.rng_seed if seed is None else seed
        streams = seed_streams(seed)
        self.pu_rngs = streams["pu"].spawn(len(state.pus)) if state.pus else []
        self.traffic_rng = streams["traffic"]
        self.mac_rng = streams["mac"]
        self.protocol_rng = streams["protocol"]

        n = len(state.sus)
        self.queue = EventQueue()
        self.queues = [deque() for _ in range(n)]
        self.busy_until = [0.0] * n
        self.active_tx: List[Optional[TransmissionAttempt]] = [None] * n
        self.wake_pending = [False] * n
        self.waiting_on: Dict[int, set] = {p: set() for p in range(len(state.pus))}
        self.ongoing: Dict[int, List[TransmissionAttempt]] = {c: [] for c in range(self.cfg.num_channels)}
        self.hops: Dict[int, List[_HopState]] = {}
        self.routes: Dict[int, RouteEntry] = {}
        self.counters = ControlCounters()
        self.knowledge = Knowledge()

        nf = len(state.flows)
        self.generated = [0] * nf
        self.delivered = [0] * nf
        self.dropped = {"no-route": [0] * nf, OVERFLOW: [0] * nf, "retry-limit": [0] * nf}
        self.delays: List[float] = []
        self.airtimes: List[float] = []
        self.delivered_bits = 0
        self.attempts: List[TransmissionAttempt] = []
        self.route_failures = 0
        self.selections = [0] * nf
        self.next_seq = [0] * nf
        self.pu_on: List[bool] = [p.process.on for p in state.pus]
        self.pu_on_since: Dict[int, float] = {p.id: 0.0 for p in state.pus if p.process.on}
        self.pu_intervals: Dict[int, List[Tuple[float, float]]] = {p.id: [] for p in state.pus}

        self.interval = self.cfg.packet_bits / self.cfg.data_rate
        self._hash = hashlib.sha256()
        self._trace: Optional[List[str]] = [] if trace else None
        self.events = 0
        self.now = 0.0

    # -- scheduling --------------------------------------------------------
    def _push(self, t: float, kind: str, actor: int, data=None) -> None:
        self.queue.push(t, kind, actor, data)

    def _log(self, t: float, kind: str, actor: int, detail: str) -> None:
        line = f"{t!r}\t{kind}\t{actor}\t{detail}"
        self._hash.update(line.encode())
        self._hash.update(b"\n")
        if self._trace is not None:
            self._trace.append(line)

    def run(self) -> RawResults:
        cfg = self.cfg
        duration = cfg.sim_duration
        starts = self.traffic_rng.uniform(0.0, cfg.flow_start_window, size=len(self.state.flows))
        for f in self.state.flows:
            self._push(float(starts[f.id]), "discovery-step", f.id)
        self._push(0.0, "hello-timer", -1)
        if self.protocol is Protocol.CSCR and cfg.reselect_period < duration:
            self._push(cfg.reselect_period, "reselect-timer", -1)
        for p in self.state.pus:
            if p.process.next_transition < duration:
                self._push(p.process.next_transition, "pu-transition", p.id)

        handlers = {
            "packet-arrival": self._on_generate,
            "transmission-start": self._on_tx_start,
            "transmission-end": self._on_tx_end,
            "pu-transition": self._on_pu,
            "hello-timer": self._on_hello,
            "reselect-timer": self._on_reselect,
            "discovery-step": self._on_discovery,
            "retry": self._on_retry,
        }
        q = self.queue
        while len(q) and q.peek_time() < duration:
            t, _, kind, actor, data = q.pop()
            self.now = t
            self.state.now = t
            self.events += 1
            handlers[kind](actor, data)
        for p, since in self.pu_on_since.items():
            self.pu_intervals[p].append((since, duration))
        return self._results()

    # -- handlers ----------------------------------------------------------
    def _on_discovery(self, fid: int, _data) -> None:
        flow = self.state.flows[fid]
        try:
            route = discover_route(self.state, self.model, flow.source, flow.destination, self.protocol,
                                   rng=self.protocol_rng, counters=self.counters, now=self.now,
                                   flow_id=fid)
        except RouteFailure:
            self.route_failures += 1
            self._log(self.now, "discovery-step", fid, "fail")
        else:
            install_route(self.state, route)
            self.routes[fid] = route
            self._load_hops(route)
            self.selections[fid] += len(route.hops)
            self._log(self.now, "discovery-step", fid, "->".join(map(str, route.path())))
        self._push(self.now, "packet-arrival", fid)

    def _load_hops(self, route: RouteEntry) -> None:
        hops = []
        for i, hop in enumerate(route.hops):
            sel = hop.selection
            exposed = tuple(p for p in self._licensed_in_range(sel.group, sel.channel)
                            if p not in sel.nulled_pus)
            hops.append(_HopState(
                flow=route.flow, index=i, sender=hop.sender, members=sel.group, receiver=hop.receiver,
                channel=sel.channel, capacity=sel.capacity, nulled=sel.nulled_pus, exposed=exposed,
                available_at=hop.available_at, tx_time=self.cfg.packet_bits / sel.capacity))
        self.hops[route.flow] = hops

    def _licensed_in_range(self, group, channel) -> List[int]:
        reach = 0
        for m in group:
            reach |= self.state.pu_reach_mask[m]
        return [p for p in iter_bits(reach) if self.state.pus[p].channel == channel]

    def _on_generate(self, fid: int, _data) -> None:
        flow = self.state.flows[fid]
        seq = self.next_seq[fid]
        self.next_seq[fid] += 1
        self.generated[fid] += 1
        nxt = self.now + self.interval
        if nxt < self.cfg.sim_duration:
            self._push(nxt, "packet-arrival", fid)
        if fid not in self.hops:
            self.dropped["no-route"][fid] += 1
            self._log(self.now, "packet-arrival", fid, f"{seq} no-route")
            return
        self._log(self.now, "packet-arrival", fid, str(seq))
        self._enqueue(flow.source, Packet(flow=fid, seq=seq, created=self.now))

    def _enqueue(self, node: int, pkt: Packet) -> None:
        if len(self.queues[node]) >= self.cfg.queue_cap:
            self.dropped[OVERFLOW][pkt.flow] += 1
            return
        self.queues[node].append(pkt)
        self._try_send(node)

    def _on_retry(self, node: int, _data) -> None:
        self._log(self.now, "retry", node, "")
        self.wake_pending[node] = False
        self._try_send(node)

    def _wait_until(self, node: int, t: float) -> None:
        self.wake_pending[node] = True
        self._push(t, "retry", node)

    def _try_send(self, u: int) -> None:
        if self.active_tx[u] is not None or self.wake_pending[u] or not self.queues[u]:
            return
        pkt = self.queues[u][0]
        hop = self.hops[pkt.flow][pkt.hop]
        now = self.now
        ready = hop.available_at
        for m in hop.members:
            if self.busy_until[m] > ready:
                ready = self.busy_until[m]
        if ready > now:
            self._wait_until(u, ready)
            return
        blockers = [p for p in hop.exposed if self.pu_on[p]]
        if blockers:
            self._wait_for_pus(u, blockers)
            return
        cur = self.state.sus
        steps = max(abs(cur[m].current_send_channel - hop.channel) for m in hop.members)
        start = now + self.cfg.switch_cost_c * steps
        end = start + hop.tx_time
        tx = TransmissionAttempt(flow=pkt.flow, seq=pkt.seq, hop=pkt.hop, members=hop.members,
                                 receiver=hop.receiver, channel=hop.channel, nulled=hop.nulled,
                                 start=start, end=end, bits=self.cfg.packet_bits,
                                 exposed=hop.exposed)
        for m in hop.members:
            self.busy_until[m] = end
            cur[m].current_send_channel = hop.channel
        self.active_tx[u] = tx
        if steps:
            self._push(start, "transmission-start", u, tx)
        else:
            self._on_tx_start(u, tx)

    def _wait_for_pus(self, u: int, blockers) -> None:
        self.wake_pending[u] = True
        for p in blockers:
            self.waiting_on[p].add(u)

    def _on_tx_start(self, u: int, tx: TransmissionAttempt) -> None:
        blockers = [p for p in tx.exposed if self.pu_on[p]]
        if blockers:
            # a PU came back during the switch: give the members back
            for m in tx.members:
                if self.busy_until[m] == tx.end:
                    self.busy_until[m] = self.now
            self.active_tx[u] = None
            self._log(self.now, "transmission-start", u, "deferred")
            self._wait_for_pus(u, blockers)
            return
        inter = self.state.in_interference
        for other in self.ongoing[tx.channel]:
            if any(inter[s, other.receiver] for s in tx.members) or \
                    any(inter[s, tx.receiver] for s in other.members):
                tx.collided = True
                other.collided = True
        self.ongoing[tx.channel].append(tx)
        self.attempts.append(tx)
        self._log(self.now, "transmission-start", u, f"{tx.flow}:{tx.seq}:{tx.hop}@{tx.channel}")
        self._push(tx.end, "transmission-end", u, tx)

    def _on_tx_end(self, u: int, tx: TransmissionAttempt) -> None:
        self.ongoing[tx.channel].remove(tx)
        self.active_tx[u] = None
        pkt = self.queues[u][0]
        if tx.collided:
            tx.outcome = COLLIDED
            pkt.retries += 1
            if pkt.retries > self.cfg.max_retries:
                self.queues[u].popleft()
                self.dropped["retry-limit"][pkt.flow] += 1
            else:
                backoff = self.mac_rng.uniform(self.cfg.backoff_min, self.cfg.backoff_max)
                self._wait_until(u, self.now + backoff)
        elif tx.blocked:
            tx.outcome = BLOCKED
        else:
            tx.outcome = DELIVERED
            self.queues[u].popleft()
            pkt.airtime += tx.end - tx.start
            pkt.retries = 0
            flow = self.state.flows[pkt.flow]
            if tx.receiver == flow.destination:
                self.delivered[pkt.flow] += 1
                self.delays.append(self.now - pkt.created)
                self.airtimes.append(pkt.airtime)
                self.delivered_bits += self.cfg.packet_bits
            else:
                pkt.hop += 1
                self._enqueue(tx.receiver, pkt)
        self._log(self.now, "transmission-end", u, f"{tx.flow}:{tx.seq}:{tx.hop} {tx.outcome}")
        self._try_send(u)

    def _on_pu(self, p: int, _data) -> None:
        pu = self.state.pus[p]
        was_on = pu.process.on
        pu.process = advance(pu.process, self.now, self.pu_rngs[p])
        on = pu.process.on
        self.pu_on[p] = on
        if on and not was_on:
            self.pu_on_since[p] = self.now
            for tx in self.ongoing[pu.channel]:
                if p in tx.exposed:
                    tx.blocked = True
        elif was_on and not on:
            self.pu_intervals[p].append((self.pu_on_since.pop(p), self.now))
            waiting = sorted(self.waiting_on[p])
            for u in waiting:
                self._release_waiter(u)
            for u in waiting:
                self._try_send(u)
        self._log(self.now, "pu-transition", p, "on" if on else "off")
        if pu.process.next_transition < self.cfg.sim_duration:
            self._push(pu.process.next_transition, "pu-transition", p)

    def _release_waiter(self, u: int) -> None:
        for s in self.waiting_on.values():
            s.discard(u)
        self.wake_pending[u] = False

    def _on_hello(self, _actor, _data) -> None:
        exchange_hello(self.state, self.model, self.knowledge, self.now, self.counters)
        self._log(self.now, "hello-timer", -1, str(self.knowledge.emissions))
        nxt = self.now + self.cfg.hello_period
        if nxt < self.cfg.sim_duration:
            self._push(nxt, "hello-timer", -1)

    def _on_reselect(self, _actor, _data) -> None:
        changed = 0
        for fid in sorted(self.routes):
            old = self.routes[fid]
            new = reselect_channels(self.state, self.model, old, self.now, self.counters)
            self.selections[fid] += len(new.hops)
            if new is not old and new.hops != old.hops:
                changed += 1
                self.routes[fid] = new
                self._load_hops(new)
                for hop in new.hops:
                    u = hop.sender
                    if any(u in s for s in self.waiting_on.values()):
                        self._release_waiter(u)
                        self._try_send(u)
        self._log(self.now, "reselect-timer", -1, str(changed))
        nxt = self.now + self.cfg.reselect_period
        if nxt < self.cfg.sim_duration:
            self._push(nxt, "reselect-timer", -1)

    # -- results -----------------------------------------------------------
    def _results(self) -> RawResults:
        in_flight = [0] * len(self.state.flows)
        for q in self.queues:
            for pkt in q:
                in_flight[pkt.flow] += 1
        return RawResults(
            config=self.cfg, protocol=self.protocol, generated=list(self.generated),
            delivered=list(self.delivered), dropped={k: list(v) for k, v in self.dropped.items()},
            in_flight=in_flight, delays=self.delays, airtimes=self.airtimes,
            delivered_bits=self.delivered_bits, attempts=self.attempts,
            pu_on_intervals=self.pu_intervals, counters=self.counters,
            route_failures=self.route_failures, selections_per_flow=list(self.selections),
            routes=dict(self.routes), trace_hash=self._hash.hexdigest(), trace=self._trace,
            events=self.events)


def run(state: NetworkState, model: ChannelModel, config: Optional[SimConfig] = None,
        protocol=Protocol.CSCR, seed: Optional[int] = None, trace: bool = False) -> RawResults:
    """Simulate ``protocol`` on ``state`` until ``sim_duration``.

    ``state`` is mutated (routes, channels, PU processes); pass a copy to
    reuse a network across protocols.
    """
    if config is not None and config != state.config:
        state.config = config
    return Simulation(state, model, protocol, seed=seed, trace=trace).run()


def collect(raw: RawResults) -> MetricsReport:
    generated = sum(raw.generated)
    delivered = sum(raw.delivered)
    dropped = sum(sum(v) for v in raw.dropped.values())
    zero = generated == 0
    attempts = raw.attempts
    active_flows = max(1, len(raw.routes))
    return MetricsReport(
        goodput_bps=raw.delivered_bits / raw.config.sim_duration,
        delay_s=float(np.mean(raw.delays)) if raw.delays else float("nan"),
        pdr=1.0 if zero else delivered / generated,
        pdr_zero_sample=zero,
        group_size=float(np.mean([len(a.members) for a in attempts])) if attempts else 0.0,
        overhead_pkts=raw.counters.total,
        generated=generated,
        delivered=delivered,
        dropped=dropped,
        collisions=sum(1 for a in attempts if a.outcome == COLLIDED),
        route_failures=raw.route_failures,
        groups_per_flow=sum(raw.selections_per_flow) / active_flows,
    )


def conservation_holds(raw: RawResults) -> bool:
    for f in range(len(raw.generated)):
        dropped = sum(v[f] for v in raw.dropped.values())
        if raw.generated[f] != raw.delivered[f] + dropped + raw.in_flight[f]:
            return False
    return True


def audit_overlay(state: NetworkState, raw: RawResults) -> List[TransmissionAttempt]:
    """Delivered transmissions that overlap an un-nulled, in-range, same-channel PU ON period.

    Exposure is recomputed from geometry rather than read from the attempt.
    """
    violations = []
    cfg = state.config
    for a in raw.attempts:
        if a.outcome != DELIVERED:
            continue
        for p in state.pus:
            if p.channel != a.channel or p.id in a.nulled:
                continue
            if not any(state.su_pu_dist[m, p.id] <= cfg.pu_range for m in a.members):
                continue
            if any(s < a.end and a.start < e for s, e in raw.pu_on_intervals[p.id]):
                violations.append(a)
                break
    return violations
