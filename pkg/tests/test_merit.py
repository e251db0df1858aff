import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tqmkit.errors import InputError
from tqmkit.merit import (
    MeritInputs,
    critical_value,
    exact_required_samples,
    figure_of_merit,
    mc_power_oracle,
    merit_sweep,
    rejection_rate,
    required_samples,
)


def inputs(r, sigmas=5.0, **kw):
    return MeritInputs(1.0, math.sqrt(r), sigmas, **kw)


def test_required_samples_example():
    assert required_samples(inputs(4.0)) == 6


def test_required_samples_divergence_and_scaling():
    for r in (1.1, 1.01, 1.001):
        assert required_samples(inputs(r)) == round(2 * 25 / (r - 1) ** 2)
    assert required_samples(inputs(1.001)) > required_samples(inputs(1.01)) > required_samples(inputs(1.1))
    n3, n6 = required_samples(inputs(1.05, 3.0)), required_samples(inputs(1.05, 6.0))
    assert n6 / n3 == pytest.approx(4.0, rel=1e-3)
    with pytest.raises(InputError):
        required_samples(MeritInputs(1.0, 1.0))
    with pytest.raises(InputError):
        MeritInputs(1.0, 0.5)


def test_figure_of_merit_examples():
    assert figure_of_merit(100000, 1.0).M == 5.0
    assert figure_of_merit(10, 10).M == 0.0
    assert figure_of_merit(1, 1000).M == -3.0
    rep = figure_of_merit(12345, 7.0)
    assert rep.M == pytest.approx(math.log10(12345 / 7.0), abs=1e-12)
    assert rep.seconds == pytest.approx(12345 / 7.0)


@given(st.integers(1, 10**8), st.floats(1e-3, 1e6), st.floats(1e-3, 1e6))
def test_merit_monotone_in_rate(N, t1, t2):
    lo, hi = sorted((t1, t2))
    assert figure_of_merit(N, hi).M <= figure_of_merit(N, lo).M


def test_merit_nondecreasing_in_sigmas():
    ns = [required_samples(inputs(2.0, s)) for s in (1, 2, 3, 4, 5, 6)]
    assert ns == sorted(ns)


def test_two_sided_option():
    one = inputs(1.5)
    two = inputs(1.5, two_sided=True)
    # one in 3.5 million is the one-sided tail; two-sided doubles it
    assert one.alpha == pytest.approx(1 / 3.49e6, rel=0.01)
    assert two.alpha == pytest.approx(2 * one.alpha)
    n1, n2 = required_samples(one), required_samples(two)
    assert n2 < n1 and n1 / n2 < 1.2


def test_critical_values():
    inp = inputs(2.0)
    assert critical_value(inp, 50, "normal") == pytest.approx(50 * (1 + 5 * math.sqrt(2 / 50)))
    assert critical_value(inp, 50, "chi2") > critical_value(inp, 50, "normal")
    with pytest.raises(InputError):
        critical_value(inp, 5, "t")


def test_mc_seed_stability_and_trials():
    inp = inputs(4.0)
    assert mc_power_oracle(inp, 10_000, seed=3) == mc_power_oracle(inp, 10_000, seed=3)
    assert rejection_rate(inp, 20, 10_000, 1) == rejection_rate(inp, 20, 10_000, 1)
    with pytest.raises(InputError):
        mc_power_oracle(inp, 100)


def test_mc_large_separation_small_n():
    assert mc_power_oracle(inputs(10.0), 10_000, seed=0) <= 5


def test_mc_matches_exact_chi2():
    for r in (1.5, 4.0):
        inp = inputs(r)
        exact = exact_required_samples(inp)
        assert abs(mc_power_oracle(inp, 20_000, seed=1) - exact) <= max(1, 0.03 * exact)


def test_mc_normal_test_reproduces_normal_approximation_at_large_n():
    inp = inputs(1.2)
    n = required_samples(inp)
    assert mc_power_oracle(inp, 20_000, seed=2, test="normal") == pytest.approx(n, rel=0.05)


def test_sweep_rows():
    rows = merit_sweep([1.5, 3.0], trials=10_000, seed=0)
    assert [round(r[0] ** 2, 12) for r in rows] == [1.5, 3.0]
    for ratio, n_an, n_mc, M in rows:
        assert M == pytest.approx(math.log10(n_mc))
        assert n_mc >= n_an
