"""Domain types: nodes, primary users, flows, configuration and topology."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, fields, replace
from typing import Deque, Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np

from .activity import PuProcess, initial_process

NodeId = int
PuId = int
ChannelId = int
FlowId = int


class ConfigError(ValueError):
    """Raised for invalid configuration values."""


class UnknownNodeError(KeyError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """All tunables of one simulation run.

    Defaults are the nominal evaluation point; radio, group and MAC
    settings are modelling choices.
    """

    num_sus: int = 25
    num_pus: int = 8
    num_channels: int = 5
    num_flows: int = 8
    area_side: float = 250.0
    su_range: float = 125.0
    pu_range: float = 140.0
    bandwidth: float = 1.5e6
    packet_size: int = 512
    data_rate: float = 100e3
    pu_activity: float = 0.4
    beta: float = 0.5
    tau: float = 0.1
    switch_cost_c: float = 1e-3
    hello_period: float = 1.0
    reselect_period: float = 1.0
    sim_duration: float = 20.0
    rng_seed: int = 42
    # radio
    max_power: float = 0.1
    path_loss_exponent: float = 3.0
    snr_ref_db: float = 10.0
    snr_ref_distance: float = 60.0
    # group construction
    max_group_size: int = 6
    max_helpers: int = 5
    interference_factor: float = 2.0
    # None: every SU sees all channels; int: random per-node subset of that size
    channels_per_node: Optional[int] = None
    # MAC / routing
    queue_cap: int = 50
    backoff_min: float = 1e-3
    backoff_max: float = 10e-3
    max_retries: int = 4
    ttl: int = 10
    flow_start_window: float = 1.0

    def validate(self) -> "SimConfig":
        for name in ("num_sus", "num_pus", "num_channels", "num_flows"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.num_channels < 1:
            raise ConfigError("num_channels must be >= 1")
        if self.num_channels > 64:
            raise ConfigError("num_channels must be <= 64")
        for name in ("area_side", "su_range", "pu_range", "bandwidth", "data_rate",
                     "tau", "switch_cost_c", "hello_period", "reselect_period",
                     "sim_duration", "max_power", "snr_ref_distance"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if self.packet_size <= 0:
            raise ConfigError("packet_size must be > 0")
        if not 0 < self.beta <= 1:
            raise ConfigError("beta must lie in (0, 1]")
        if not 0 < self.pu_activity < 1:
            raise ConfigError("pu_activity must lie in (0, 1)")
        if self.max_group_size < 1 or self.max_helpers < 0:
            raise ConfigError("max_group_size >= 1 and max_helpers >= 0 required")
        if self.channels_per_node is not None and not 1 <= self.channels_per_node <= self.num_channels:
            raise ConfigError("channels_per_node must lie in [1, num_channels]")
        if not 0 < self.backoff_min <= self.backoff_max:
            raise ConfigError("backoff window must satisfy 0 < min <= max")
        if self.queue_cap < 1 or self.max_retries < 0 or self.ttl < 1:
            raise ConfigError("queue_cap >= 1, max_retries >= 0, ttl >= 1 required")
        if self.flow_start_window < 0:
            raise ConfigError("flow_start_window must be >= 0")
        return self

    def with_overrides(self, **kwargs) -> "SimConfig":
        return replace(self, **kwargs).validate()

    @classmethod
    def field_types(cls) -> Dict[str, type]:
        out = {}
        for f in fields(cls):
            default = f.default
            out[f.name] = type(default) if default is not None else int
        return out

    @property
    def packet_bits(self) -> int:
        return 8 * self.packet_size

    @property
    def interference_range(self) -> float:
        return self.interference_factor * self.su_range


@dataclass
class SecondaryUser:
    id: NodeId
    position: Tuple[float, float]
    tx_range: float
    current_send_channel: ChannelId
    available_channels: FrozenSet[ChannelId]
    max_power: float
    queue: Deque = field(default_factory=deque, repr=False, compare=False)


@dataclass
class PrimaryUser:
    id: PuId
    position: Tuple[float, float]
    tx_range: float
    active_channels: FrozenSet[ChannelId]
    process: PuProcess

    @property
    def channel(self) -> ChannelId:
        # one licensed channel per PU
        return min(self.active_channels)


@dataclass
class Flow:
    id: FlowId
    source: NodeId
    destination: NodeId
    rate: float
    channel_in_use_per_hop: Dict[int, ChannelId] = field(default_factory=dict)
    hop_members: Dict[int, Tuple[NodeId, ...]] = field(default_factory=dict)
    hop_receivers: Dict[int, NodeId] = field(default_factory=dict)
    active: bool = False

    def path_nodes(self) -> List[NodeId]:
        """Relays and destination of the installed route, in hop order."""
        nodes = []
        for hop in sorted(self.hop_members):
            nodes.append(self.hop_members[hop][0])
        if self.hop_receivers:
            nodes.append(self.hop_receivers[max(self.hop_receivers)])
        return nodes


class NetworkState:
    """Every SU, PU and flow of a run plus the simulation clock.

    Geometry is precomputed once; flow-dependent indices (who sends on which
    channel, who carries traffic) are cached per ``version`` and rebuilt
    lazily after any route change.
    """

    def __init__(self, config: SimConfig, sus: List[SecondaryUser],
                 pus: List[PrimaryUser], flows: List[Flow], now: float = 0.0):
        self.config = config
        self.sus = sus
        self.pus = pus
        self.flows = flows
        self.now = now
        self.version = 0
        self._cache: dict = {}
        self._geometry()

    def _geometry(self) -> None:
        cfg = self.config
        self.su_pos = np.array([s.position for s in self.sus], dtype=float).reshape(-1, 2)
        self.pu_pos = np.array([p.position for p in self.pus], dtype=float).reshape(-1, 2)
        diff = self.su_pos[:, None, :] - self.su_pos[None, :, :]
        self.su_dist = np.sqrt((diff ** 2).sum(-1))
        diff = self.su_pos[:, None, :] - self.pu_pos[None, :, :]
        self.su_pu_dist = np.sqrt((diff ** 2).sum(-1)).reshape(len(self.sus), len(self.pus))
        n = len(self.sus)
        self.in_range = (self.su_dist <= cfg.su_range) & ~np.eye(n, dtype=bool)
        self.in_interference = self.su_dist <= cfg.interference_range
        self.pu_in_range = self.su_pu_dist <= cfg.pu_range
        self.nbr_mask = [_mask(np.flatnonzero(self.in_range[i])) for i in range(n)]
        self.interf_mask = [_mask(np.flatnonzero(self.in_interference[i])) for i in range(n)]
        self.pu_reach_mask = [_mask(np.flatnonzero(self.pu_in_range[i])) for i in range(n)]
        self.pu_channel = np.array([p.channel for p in self.pus], dtype=np.int64)

    def su(self, n: NodeId) -> SecondaryUser:
        if not 0 <= n < len(self.sus):
            raise UnknownNodeError(n)
        return self.sus[n]

    def touch(self) -> None:
        """Invalidate flow-dependent caches."""
        self.version += 1
        self._cache.clear()

    # -- route bookkeeping -------------------------------------------------
    def set_hop(self, flow_id: FlowId, hop: int, members: Tuple[NodeId, ...],
                receiver: NodeId, channel: ChannelId) -> None:
        f = self.flows[flow_id]
        f.hop_members[hop] = tuple(members)
        f.hop_receivers[hop] = receiver
        f.channel_in_use_per_hop[hop] = channel
        self.touch()

    def clear_route(self, flow_id: FlowId) -> None:
        f = self.flows[flow_id]
        f.hop_members.clear()
        f.hop_receivers.clear()
        f.channel_in_use_per_hop.clear()
        f.active = False
        self.touch()

    def sending_roles(self, node: NodeId) -> Dict[Tuple[FlowId, int], ChannelId]:
        """(flow, hop) -> channel for every active-flow hop the node sends in."""
        roles = self._cache.get("roles")
        if roles is None:
            roles = {}
            for f in self.flows:
                if not f.active:
                    continue
                for hop, members in f.hop_members.items():
                    for m in members:
                        roles.setdefault(m, {})[(f.id, hop)] = f.channel_in_use_per_hop[hop]
            self._cache["roles"] = roles
        return roles.get(node, {})

    def carrying_mask(self) -> int:
        """Bitmask of SUs that take part in some active flow."""
        m = self._cache.get("carry")
        if m is None:
            m = 0
            for f in self.flows:
                if not f.active:
                    continue
                for members in f.hop_members.values():
                    m |= _mask(members)
                m |= _mask(f.hop_receivers.values())
            self._cache["carry"] = m
        return m

    def flow_reach_masks(self) -> List[int]:
        """Per SU, bitmask of active flows with a path node in interference range."""
        masks = self._cache.get("flow_reach")
        if masks is None:
            masks = [0] * len(self.sus)
            for f in self.flows:
                if not f.active:
                    continue
                near = 0
                for p in f.path_nodes():
                    near |= self.interf_mask[p]
                bit = 1 << f.id
                for i in iter_bits(near):
                    masks[i] |= bit
            self._cache["flow_reach"] = masks
        return masks

    # -- serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "config": {f.name: getattr(self.config, f.name) for f in fields(self.config)},
            "now": self.now,
            "sus": [
                {"id": s.id, "position": list(s.position), "tx_range": s.tx_range,
                 "current_send_channel": s.current_send_channel,
                 "available_channels": sorted(s.available_channels), "max_power": s.max_power}
                for s in self.sus
            ],
            "pus": [
                {"id": p.id, "position": list(p.position), "tx_range": p.tx_range,
                 "active_channels": sorted(p.active_channels),
                 "mu": p.process.mu, "lambda_on": p.process.lambda_on,
                 "on": p.process.on, "next_transition": p.process.next_transition}
                for p in self.pus
            ],
            "flows": [
                {"id": f.id, "source": f.source, "destination": f.destination, "rate": f.rate,
                 "active": f.active,
                 "channel_in_use_per_hop": {str(k): v for k, v in sorted(f.channel_in_use_per_hop.items())}}
                for f in self.flows
            ],
        }

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _mask(ids: Iterable[int]) -> int:
    m = 0
    for i in ids:
        m |= 1 << int(i)
    return m


def iter_bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def build_topology(config: SimConfig, rng: np.random.Generator) -> NetworkState:
    """Place SUs and PUs uniformly in the square and draw flow endpoints."""
    config.validate()
    if config.num_flows > 0 and config.num_sus < 2:
        raise ConfigError("flows need at least two SUs")
    k = config.num_channels
    all_channels = frozenset(range(k))

    sus = []
    su_xy = rng.uniform(0.0, config.area_side, size=(config.num_sus, 2))
    for i in range(config.num_sus):
        if config.channels_per_node is None:
            avail = all_channels
        else:
            avail = frozenset(int(c) for c in rng.choice(k, size=config.channels_per_node, replace=False))
        current = int(rng.choice(sorted(avail)))
        sus.append(SecondaryUser(
            id=i, position=(float(su_xy[i, 0]), float(su_xy[i, 1])), tx_range=config.su_range,
            current_send_channel=current, available_channels=avail, max_power=config.max_power))

    pus = []
    pu_xy = rng.uniform(0.0, config.area_side, size=(config.num_pus, 2))
    for j in range(config.num_pus):
        channel = int(rng.integers(k))
        process = initial_process(config.pu_activity, rng)
        pus.append(PrimaryUser(
            id=j, position=(float(pu_xy[j, 0]), float(pu_xy[j, 1])), tx_range=config.pu_range,
            active_channels=frozenset({channel}), process=process))

    flows = []
    for f in range(config.num_flows):
        src, dst = (int(x) for x in rng.choice(config.num_sus, size=2, replace=False))
        flows.append(Flow(id=f, source=src, destination=dst, rate=config.data_rate))

    return NetworkState(config, sus, pus, flows)


def neighbors(state: NetworkState, n: NodeId) -> set:
    """SUs within transmission range of ``n`` (excluding ``n``)."""
    state.su(n)
    return set(int(i) for i in np.flatnonzero(state.in_range[n]))


def euclidean(a: Tuple[float, float], b: Tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])
