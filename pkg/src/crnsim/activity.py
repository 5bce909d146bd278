"""ON-OFF primary-user activity and the probability of PU appearance."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

MEAN_ON = 1.0
JITTER = 0.5


class TimeRegressionError(ValueError):
    pass


@dataclass(frozen=True)
class PuProcess:
    """Alternating renewal process.

    ``mu`` is the rate of the exponential OFF period and ``lambda_on`` the
    rate of the exponential ON period, both in 1/s.
    """

    mu: float
    lambda_on: float
    on: bool
    next_transition: float
    last_time: float = 0.0

    @property
    def activity(self) -> float:
        return (1.0 / self.lambda_on) / (1.0 / self.lambda_on + 1.0 / self.mu)


def rates_for_activity(activity: float, rng: np.random.Generator) -> tuple:
    """Return ``(mu, lambda_on)`` giving long-run ON fraction ``activity``.

    Mean ON is 1 s and mean OFF ``(1 - a) / a`` s, both scaled by one common
    uniform factor in [0.5, 1.5] so the ratio is preserved.
    """
    if not 0 < activity < 1:
        raise ValueError("activity must lie in (0, 1)")
    scale = rng.uniform(1.0 - JITTER, 1.0 + JITTER)
    mean_on = MEAN_ON * scale
    mean_off = MEAN_ON * (1.0 - activity) / activity * scale
    return 1.0 / mean_off, 1.0 / mean_on


def initial_process(activity: float, rng: np.random.Generator, now: float = 0.0) -> PuProcess:
    """A process drawn from its stationary distribution at ``now``."""
    mu, lam = rates_for_activity(activity, rng)
    on = bool(rng.random() < activity)
    rate = lam if on else mu
    return PuProcess(mu=mu, lambda_on=lam, on=on,
                     next_transition=now + rng.exponential(1.0 / rate), last_time=now)


def advance(process: PuProcess, now: float, rng: np.random.Generator) -> PuProcess:
    """Toggle through every transition due at or before ``now``."""
    if now < process.last_time:
        raise TimeRegressionError(f"now={now} precedes last update {process.last_time}")
    on = process.on
    t = process.next_transition
    while t <= now:
        on = not on
        rate = process.lambda_on if on else process.mu
        t = t + rng.exponential(1.0 / rate)
    return replace(process, on=on, next_transition=t, last_time=now)


def p_pu(active_pus: Iterable, tau: float) -> float:
    """Probability that at least one listed PU turns up within ``tau``.

    ``active_pus`` holds :class:`PuProcess` objects or bare OFF rates.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    total = 0.0
    for p in active_pus:
        total += p.mu if isinstance(p, PuProcess) else float(p)
    return -math.expm1(-tau * total)


def on_fraction(process: PuProcess, horizon: float, rng: np.random.Generator) -> float:
    """Empirical ON fraction of a sampled trajectory over ``[last_time, last_time + horizon]``."""
    t0 = process.last_time
    end = t0 + horizon
    on_time = 0.0
    t = t0
    proc = process
    while t < end:
        nxt = min(proc.next_transition, end)
        if proc.on:
            on_time += nxt - t
        t = nxt
        if t < end:
            proc = advance(proc, t, rng)
    return on_time / horizon
