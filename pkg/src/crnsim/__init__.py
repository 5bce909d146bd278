"""Cooperative routing with channel selection for cognitive radio networks."""

from .activity import PuProcess, advance, p_pu
from .engine import MetricsReport, RawResults, audit_overlay, collect, conservation_holds, run
from .experiments import SweepSpec, make_network, run_sweep
from .kernels import BACKEND
from .metric import MetricInputs, count_interference, lc_metric, switching_delay
from .model import (ConfigError, Flow, NetworkState, PrimaryUser, SecondaryUser, SimConfig,
                    build_topology, neighbors)
from .protocols import Protocol, RouteEntry, discover_route, exchange_hello, reselect_channels
from .radio import ChannelModel, achievable_capacity, beamform, sample_coefficients
from .selection import SelectionResult, enumerate_groups, is_valid_channel, select

__all__ = [
    "BACKEND", "ChannelModel", "ConfigError", "Flow", "MetricInputs", "MetricsReport", "NetworkState",
    "PrimaryUser", "Protocol", "PuProcess", "RawResults", "RouteEntry", "SecondaryUser",
    "SelectionResult", "SimConfig", "SweepSpec", "achievable_capacity", "advance", "audit_overlay", "beamform",
    "build_topology", "collect", "conservation_holds", "count_interference", "discover_route",
    "enumerate_groups", "exchange_hello", "is_valid_channel", "lc_metric", "make_network", "neighbors", "p_pu",
    "reselect_channels", "run", "run_sweep", "sample_coefficients", "select", "switching_delay",
]
