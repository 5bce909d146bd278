"""``simulate`` command line entry point.

Exit codes: 0 success, 1 configuration error, 2 simulation failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .engine import collect
from .experiments import (aggregate, build_config, build_sweep, parse_config_text, rows_to_csv,
                          run_point, run_sweep_reports, sweep_configs)
from .model import ConfigError

log = logging.getLogger("crnsim")


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simulate", description="Cooperative CRN routing simulator")
    p.add_argument("--config", type=Path, help="key = value configuration file")
    p.add_argument("--sweep", help="parameter to sweep (num_sus, num_pus, pu_activity, num_channels, num_flows)")
    p.add_argument("--values", help="comma-separated sweep values (default: full range)")
    p.add_argument("--protocols", help="comma-separated subset of CSCR,UNDERCOVER,LAUNCH")
    p.add_argument("--seeds", help="number of consecutive seeds from rng_seed")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any configuration key (repeatable)")
    p.add_argument("--out", type=Path, help="CSV output path (default: stdout)")
    p.add_argument("--trace", type=Path, help="write the event trace of every run to this file")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors are configuration errors; --help still exits 0
        return 1 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        entries = {}
        if args.config is not None:
            entries = parse_config_text(args.config.read_text())
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            entries[k.strip()] = v.strip()
        if args.sweep is not None:
            entries["sweep"] = args.sweep
        if args.values is not None:
            entries["values"] = args.values
        if args.protocols is not None:
            entries["protocols"] = args.protocols
        if args.seeds is not None:
            entries["seeds"] = str(args.seeds)
        config = build_config(entries)
        spec = build_sweep(entries, config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        reports = run_sweep_reports(spec, config, n_jobs=args.jobs)
        text = rows_to_csv(aggregate(spec, reports))
        if args.trace is not None:
            _write_traces(args.trace, spec, config)
    except Exception as exc:  # noqa: BLE001 - any failure inside a run maps to exit 2
        log.exception("simulation failed")
        print(f"simulation failure: {exc}", file=sys.stderr)
        return 2

    if args.out is not None:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _write_traces(path: Path, spec, config) -> None:
    with path.open("w") as fh:
        for value, cfg in sweep_configs(spec, config):
            for seed in spec.seeds:
                for proto, raw in run_point(cfg, seed, spec.protocols, trace=True).items():
                    fh.write(f"# protocol={proto.value} sweep_value={value} seed={seed} "
                             f"hash={raw.trace_hash}\n")
                    for line in raw.trace:
                        fh.write(line + "\n")


if __name__ == "__main__":
    sys.exit(main())
