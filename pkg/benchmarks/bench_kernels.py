"""Compiled vs pure-Python candidate scoring.

Captures the kernel inputs of every relay/receiver pair on the nominal
network, times both backends on them, then times one end-to-end nominal run
per backend (the fallback run in a subprocess with ``CRNSIM_PURE_PYTHON=1``).

    python benchmarks/bench_kernels.py [--repeat 5] [--seed 42]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from crnsim import kernels
from crnsim.experiments import make_network
from crnsim.model import SimConfig, iter_bits
from crnsim.selection import UnreachableError, select

END_TO_END = """
import time
from crnsim import kernels
from crnsim.engine import run
from crnsim.experiments import make_network
from crnsim.model import SimConfig
cfg = SimConfig()
state, model = make_network(cfg, {seed})
t0 = time.perf_counter()
run(state, model, seed={seed})
print(kernels.BACKEND, time.perf_counter() - t0)
"""


def capture_workload(seed):
    cfg = SimConfig()
    state, model = make_network(cfg, seed)
    calls = []
    original = kernels.score_candidates

    def spy(*args):
        calls.append(args)
        return original(*args)

    kernels.score_candidates = spy
    try:
        for u in range(len(state.sus)):
            for v in iter_bits(state.nbr_mask[u]):
                try:
                    select(state, u, v, model)
                except UnreachableError:
                    pass
    finally:
        kernels.score_candidates = original
    return calls


def time_backend(fn, calls, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for args in calls:
            fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best / len(calls)


def end_to_end(seed, pure):
    env = dict(os.environ)
    if pure:
        env["CRNSIM_PURE_PYTHON"] = "1"
    else:
        env.pop("CRNSIM_PURE_PYTHON", None)
    out = subprocess.run([sys.executable, "-c", END_TO_END.format(seed=seed)], env=env,
                         capture_output=True, text=True, check=True).stdout.split()
    return out[0], float(out[1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args(argv)

    compiled = kernels.compiled_score_candidates()
    if compiled is None:
        sys.exit("compiled extension not built; run pip install -e . first")
    calls = capture_workload(args.seed)
    subsets = np.mean([len(c[8]) for c in calls])
    print(f"workload: {len(calls)} selections on the nominal network, "
          f"{subsets:.1f} candidate groups x {calls[0][0].shape[0]} channels each")

    for a in calls[:50]:
        ref = kernels.python_score_candidates(*a)
        got = compiled(*a)
        for x, y in zip(ref, got):
            np.testing.assert_allclose(x, y, rtol=1e-9, atol=1e-12)

    t_c = time_backend(compiled, calls, args.repeat)
    t_p = time_backend(kernels.python_score_candidates, calls, max(1, args.repeat // 2))
    print(f"{'backend':<10}{'per call':>14}")
    print(f"{'cython':<10}{t_c * 1e6:>11.1f} us")
    print(f"{'python':<10}{t_p * 1e6:>11.1f} us")
    print(f"kernel speedup {t_p / t_c:.1f}x")

    name_c, e_c = end_to_end(args.seed, pure=False)
    name_p, e_p = end_to_end(args.seed, pure=True)
    print(f"end-to-end nominal run: {name_c} {e_c:.2f} s, {name_p} {e_p:.2f} s "
          f"({e_p / e_c:.1f}x)")


if __name__ == "__main__":
    main()
