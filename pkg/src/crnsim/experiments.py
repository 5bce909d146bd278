"""Config files, parameter sweeps, multi-seed aggregation and CSV output."""

from __future__ import annotations

import copy
import csv
import io
import math
from dataclasses import dataclass, fields
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .engine import MetricsReport, RawResults, collect, run, seed_streams
from .model import ConfigError, NetworkState, SimConfig, build_topology
from .protocols import Protocol
from .radio import ChannelModel, sample_coefficients

CSV_COLUMNS = (
    "protocol", "sweep_param", "sweep_value", "seed_count",
    "goodput_bps_mean", "goodput_bps_std", "delay_s_mean", "delay_s_std",
    "pdr_mean", "pdr_std", "group_size_mean", "overhead_pkts_mean",
)

# allowed range per sweepable parameter, and its default sweep axis
SWEEP_RANGES = {
    "num_sus": (10, 30),
    "num_pus": (0, 16),
    "pu_activity": (0.2, 0.8),
    "num_channels": (3, 9),
    "num_flows": (1, 16),
}
DEFAULT_VALUES = {
    "num_sus": [10, 15, 20, 25, 30],
    "num_pus": [0, 4, 8, 12, 16],
    "pu_activity": [0.2, 0.4, 0.6, 0.8],
    "num_channels": [3, 5, 7, 9],
    "num_flows": [1, 4, 8, 12, 16],
}
ALL_PROTOCOLS = (Protocol.CSCR, Protocol.UNDERCOVER, Protocol.LAUNCH)


@dataclass
class SweepSpec:
    parameter: Optional[str]
    values: List
    seeds: List[int]
    protocols: Tuple[Protocol, ...] = ALL_PROTOCOLS

    def validate(self) -> "SweepSpec":
        if not self.seeds:
            raise ConfigError("sweep needs at least one seed")
        if not self.protocols:
            raise ConfigError("sweep needs at least one protocol")
        if self.parameter is None:
            return self
        if self.parameter not in SWEEP_RANGES:
            raise ConfigError(f"cannot sweep {self.parameter!r}; choose from {sorted(SWEEP_RANGES)}")
        lo, hi = SWEEP_RANGES[self.parameter]
        for v in self.values:
            if not lo <= v <= hi:
                raise ConfigError(f"{self.parameter}={v} outside [{lo}, {hi}]")
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        return self


def default_seeds(base: int, count: int = 10) -> List[int]:
    return [base + i for i in range(count)]


# -- configuration files ----------------------------------------------------

def _coerce(name: str, raw: str, kind: type):
    raw = raw.strip()
    if kind is bool:
        return raw.lower() in ("1", "true", "yes", "on")
    if raw.lower() == "none":
        return None
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return raw


def parse_config_text(text: str) -> Dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


SWEEP_KEYS = ("sweep", "values", "seeds", "seed_list", "protocols")


def build_config(entries: Dict[str, str], base: Optional[SimConfig] = None) -> SimConfig:
    base = base or SimConfig()
    types = SimConfig.field_types()
    kwargs = {}
    for key, raw in entries.items():
        if key in SWEEP_KEYS:
            continue
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[key] = _coerce(key, raw, types[key])
    try:
        return base.with_overrides(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _parse_values(param: str, raw: str) -> List:
    kind = float if param == "pu_activity" else int
    try:
        return [kind(v) for v in raw.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"bad sweep values {raw!r}") from None


def build_sweep(entries: Dict[str, str], config: SimConfig) -> SweepSpec:
    param = entries.get("sweep") or None
    if param in ("none", "None"):
        param = None
    if param is not None and param not in SWEEP_RANGES:
        raise ConfigError(f"cannot sweep {param!r}; choose from {sorted(SWEEP_RANGES)}")
    if param is None:
        values = [None]
    elif entries.get("values"):
        values = _parse_values(param, entries["values"])
    else:
        values = list(DEFAULT_VALUES[param])
    try:
        if entries.get("seed_list"):
            seeds = [int(s) for s in entries["seed_list"].replace(",", " ").split()]
        else:
            seeds = default_seeds(config.rng_seed, int(entries.get("seeds", 10)))
    except ValueError as exc:
        raise ConfigError(f"bad seeds: {exc}") from None
    protos = entries.get("protocols")
    try:
        protocols = tuple(Protocol.parse(p) for p in protos.split(",")) if protos else ALL_PROTOCOLS
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return SweepSpec(parameter=param, values=values, seeds=seeds, protocols=protocols).validate()


# -- running ----------------------------------------------------------------

def make_network(config: SimConfig, seed: int) -> Tuple[NetworkState, ChannelModel]:
    streams = seed_streams(seed)
    state = build_topology(config, streams["topology"])
    model = sample_coefficients(state, streams["channel"])
    return state, model


def run_point(config: SimConfig, seed: int, protocols: Sequence[Protocol] = ALL_PROTOCOLS,
              trace: bool = False) -> Dict[Protocol, RawResults]:
    """Run every protocol on one shared (topology, channel, PU) realisation."""
    state, model = make_network(config, seed)
    out = {}
    for proto in protocols:
        out[Protocol(proto)] = run(copy.deepcopy(state), model, protocol=proto, seed=seed, trace=trace)
    return out


def _point_reports(config: SimConfig, seed: int, protocols) -> Dict[Protocol, MetricsReport]:
    return {p: collect(raw) for p, raw in run_point(config, seed, protocols).items()}


def sweep_configs(spec: SweepSpec, base: SimConfig) -> List[Tuple[object, SimConfig]]:
    out = []
    for value in spec.values:
        if spec.parameter is None:
            out.append(("nominal", base))
        else:
            out.append((value, base.with_overrides(**{spec.parameter: value})))
    return out


def run_sweep_reports(spec: SweepSpec, base: SimConfig, n_jobs: int = 1
                      ) -> Dict[Tuple[object, Protocol], List[MetricsReport]]:
    """Per (value, protocol), the list of per-seed reports in seed order."""
    spec.validate()
    tasks = [(value, cfg, seed) for value, cfg in sweep_configs(spec, base) for seed in spec.seeds]
    if n_jobs == 1:
        results = [_point_reports(cfg, seed, spec.protocols) for _, cfg, seed in tasks]
    else:
        from joblib import Parallel, delayed
        results = Parallel(n_jobs=n_jobs)(
            delayed(_point_reports)(cfg, seed, spec.protocols) for _, cfg, seed in tasks)
    out: Dict[Tuple[object, Protocol], List[MetricsReport]] = {}
    for (value, _, _), reports in zip(tasks, results):
        for proto in spec.protocols:
            out.setdefault((value, proto), []).append(reports[proto])
    return out


def _mean(xs) -> float:
    xs = [x for x in xs if not math.isnan(x)]
    return float(np.mean(xs)) if xs else float("nan")


def _std(xs) -> float:
    xs = [x for x in xs if not math.isnan(x)]
    return float(np.std(xs, ddof=1)) if len(xs) > 1 else 0.0


def aggregate(spec: SweepSpec, reports: Dict[Tuple[object, Protocol], List[MetricsReport]]) -> List[dict]:
    rows = []
    param = spec.parameter or "none"
    for value in spec.values:
        key_value = "nominal" if spec.parameter is None else value
        for proto in spec.protocols:
            rs = reports[(key_value, proto)]
            rows.append({
                "protocol": proto.value,
                "sweep_param": param,
                "sweep_value": key_value,
                "seed_count": len(rs),
                "goodput_bps_mean": _mean([r.goodput_bps for r in rs]),
                "goodput_bps_std": _std([r.goodput_bps for r in rs]),
                "delay_s_mean": _mean([r.delay_s for r in rs]),
                "delay_s_std": _std([r.delay_s for r in rs]),
                "pdr_mean": _mean([r.pdr for r in rs]),
                "pdr_std": _std([r.pdr for r in rs]),
                "group_size_mean": _mean([r.group_size for r in rs]),
                "overhead_pkts_mean": _mean([float(r.overhead_pkts) for r in rs]),
            })
    return rows


def run_sweep(spec: SweepSpec, base: SimConfig, n_jobs: int = 1) -> str:
    """Run a sweep and return the aggregated CSV text."""
    return rows_to_csv(aggregate(spec, run_sweep_reports(spec, base, n_jobs)))


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()
