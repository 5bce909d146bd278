import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crnsim.activity import (PuProcess, TimeRegressionError, advance, initial_process, on_fraction, p_pu,
                             rates_for_activity)
from oracles import p_pu_oracle


def test_empty_list_is_zero():
    assert p_pu([], 0.1) == 0.0


def test_single_pu_half():
    assert p_pu([math.log(2)], 1.0) == pytest.approx(0.5, rel=1e-15)


def test_three_pus():
    assert p_pu([0.1, 0.2, 0.3], 2.0) == pytest.approx(1 - math.exp(-1.2), rel=1e-14)
    assert p_pu([0.1, 0.2, 0.3], 2.0) == pytest.approx(0.698806, abs=1e-6)


def test_accepts_processes():
    procs = [PuProcess(mu=m, lambda_on=1.0, on=False, next_transition=1.0) for m in (0.1, 0.2, 0.3)]
    assert p_pu(procs, 2.0) == p_pu([0.1, 0.2, 0.3], 2.0)


def test_negative_tau_rejected():
    with pytest.raises(ValueError):
        p_pu([1.0], -1.0)


mus = st.lists(st.floats(1e-3, 50.0), max_size=8)
taus = st.floats(1e-4, 10.0)


@settings(max_examples=200, deadline=None)
@given(mus, taus)
def test_bounds_and_oracle(ms, tau):
    v = p_pu(ms, tau)
    assert 0.0 <= v <= 1.0
    assert (v == 0.0) == (len(ms) == 0)
    assert v == pytest.approx(p_pu_oracle(ms, tau), rel=1e-12, abs=1e-300)


@settings(max_examples=200, deadline=None)
@given(mus, mus, taus, taus)
def test_monotone_and_additive(a, b, t1, t2):
    lo, hi = sorted((t1, t2))
    assert p_pu(a, lo) <= p_pu(a, hi)
    assert p_pu(a + b, t1) >= max(p_pu(a, t1), p_pu(b, t1))


def test_advance_before_transition_is_noop(rng):
    proc = PuProcess(mu=1.0, lambda_on=1.0, on=True, next_transition=5.0)
    assert advance(proc, 3.0, rng) == PuProcess(mu=1.0, lambda_on=1.0, on=True, next_transition=5.0,
                                                last_time=3.0)


def test_advance_rejects_regression(rng):
    proc = PuProcess(mu=1.0, lambda_on=1.0, on=True, next_transition=5.0, last_time=4.0)
    with pytest.raises(TimeRegressionError):
        advance(proc, 3.0, rng)


def test_advance_is_deterministic():
    proc = PuProcess(mu=1.0, lambda_on=2.0, on=False, next_transition=0.3)
    a = advance(proc, 50.0, np.random.default_rng(3))
    b = advance(proc, 50.0, np.random.default_rng(3))
    assert a == b


def test_huge_mu_is_always_on(rng):
    proc = PuProcess(mu=1e6, lambda_on=1.0, on=True, next_transition=0.5)
    assert on_fraction(proc, 1e3, rng) > 0.999


def test_renewal_fraction(rng):
    proc = PuProcess(mu=1.0, lambda_on=1.0, on=False, next_transition=rng.exponential(1.0))
    assert on_fraction(proc, 1e4, rng) == pytest.approx(0.5, abs=0.02)


@pytest.mark.parametrize("a", [0.2, 0.4, 0.6, 0.8])
def test_configured_activity_matches(a):
    rng = np.random.default_rng(int(a * 100))
    proc = initial_process(a, rng)
    assert proc.activity == pytest.approx(a, rel=1e-12)
    assert on_fraction(proc, 1e4, rng) == pytest.approx(a, abs=0.02)


def test_rates_jitter_preserves_ratio(rng):
    for _ in range(50):
        mu, lam = rates_for_activity(0.3, rng)
        assert 0.5 <= 1 / lam <= 1.5
        assert (1 / lam) / (1 / lam + 1 / mu) == pytest.approx(0.3)
