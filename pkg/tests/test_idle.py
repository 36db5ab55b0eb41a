import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import single
from rtspn.feasibility import subsets
from rtspn.idle import (
    NearEqualRates,
    idle_time_expected,
    idle_time_monte_carlo,
    phase_type_deficit,
    residual_deficit,
)
from rtspn.model import IndependentBernoulli

E_INV = math.exp(-1)
# E[(1 - t1 - t2)^+] with t1 ~ Exp(1), t2 ~ Exp(2), from scipy dblquad of the joint density
DBLQUAD_1_2 = 0.1680912407245783


def test_empty_rates_is_full_frame():
    assert residual_deficit([], 1.0) == 1.0
    assert residual_deficit([], 2.5) == 2.5


def test_single_rate():
    assert residual_deficit([1.0], 1.0) == pytest.approx(E_INV, abs=1e-15)


def test_two_rates_against_quadrature():
    assert residual_deficit([1.0, 2.0], 1.0) == pytest.approx(DBLQUAD_1_2, abs=1e-13)


def test_two_rates_against_grid_integration():
    # trapezoid on a 1e-5 grid of the two-rate hypoexponential CDF
    s = np.linspace(0.0, 1.0, 100_001)
    cdf = 1.0 - (2.0 * np.exp(-s) - np.exp(-2.0 * s))
    assert residual_deficit([1.0, 2.0], 1.0) == pytest.approx(np.trapezoid(cdf, s), abs=1e-9)


def test_single_rate_monte_carlo_oracle():
    rng = np.random.default_rng(2024)
    x = np.maximum(1.0 - rng.exponential(1.0, 1_000_000), 0.0)
    se = x.std(ddof=1) / math.sqrt(len(x))
    assert abs(residual_deficit([1.0], 1.0) - x.mean()) < 4 * se


def test_near_equal_rates_raise():
    with pytest.raises(NearEqualRates):
        residual_deficit([1.0, 1.0 + 1e-12], 1.0)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        residual_deficit([0.0], 1.0)
    with pytest.raises(ValueError):
        residual_deficit([1.0], 0.0)


def test_phase_type_matches_closed_form():
    for rates in ([1.0], [1.0, 2.0], [0.7, 1.0, 1.6, 2.3], [0.5, 3.0, 7.0]):
        assert phase_type_deficit(rates, 1.3) == pytest.approx(residual_deficit(rates, 1.3), abs=1e-12)


def test_phase_type_erlang():
    # Erlang(2, rate 1) on T = 1: int_0^1 (1 - e^-s - s e^-s) ds
    expected = 1.0 - (1.0 - E_INV) - (1.0 - 2.0 * E_INV)
    assert phase_type_deficit([1.0, 1.0], 1.0) == pytest.approx(expected, abs=1e-13)


def test_log_space_branch_agrees():
    rates = [0.5 + 0.37 * i for i in range(10)]
    assert residual_deficit(rates, 4.0) == pytest.approx(phase_type_deficit(rates, 4.0), abs=1e-9)


def test_expected_empty_subset():
    spec = single([1.0])
    assert idle_time_expected([], spec).value == 1.0


def test_expected_every_frame():
    spec = single([1.0])
    est = idle_time_expected([1], spec)
    assert est.value == pytest.approx(E_INV, abs=1e-15)
    assert est.std_error == 0.0 and est.method == "analytic"


def test_expected_bernoulli_mixture():
    spec = single([1.0], arrivals=IndependentBernoulli({1: 0.5}))
    assert idle_time_expected([1], spec).value == pytest.approx(0.5 + 0.5 * E_INV, abs=1e-15)
    mc = idle_time_monte_carlo([1], spec, 400_000, 5)
    assert abs(mc.value - (0.5 + 0.5 * E_INV)) < 4 * mc.std_error


def test_repeated_rates_fallbacks():
    spec = single([2.0, 2.0])
    exact = idle_time_expected([1, 2], spec)
    assert exact.method == "analytic"
    sampled = idle_time_expected([1, 2], spec, fallback="monte_carlo", samples=200_000, seed=3)
    assert sampled.method == "monte_carlo"
    assert abs(sampled.value - exact.value) < 4 * sampled.std_error


def test_monte_carlo_empty_subset():
    est = idle_time_monte_carlo([], single([1.0]), 10, 1)
    assert est.value == 1.0 and est.std_error == 0.0


def test_monte_carlo_deterministic():
    spec = single([1.0, 2.0])
    a = idle_time_monte_carlo([1, 2], spec, 50_000, 11)
    b = idle_time_monte_carlo([1, 2], spec, 50_000, 11)
    assert a == b
    assert idle_time_monte_carlo([1, 2], spec, 50_000, 12).value != a.value


def test_monte_carlo_single_sample():
    est = idle_time_monte_carlo([1], single([1.0]), 1, 0)
    assert 0.0 <= est.value <= 1.0 and est.std_error == 0.0


rate_lists = st.lists(st.floats(0.1, 8.0), min_size=0, max_size=6, unique=True).filter(
    lambda rs: all(abs(a - b) > 1e-3 for i, a in enumerate(rs) for b in rs[i + 1 :])
)


@given(rate_lists, st.floats(0.1, 5.0), st.floats(0.1, 8.0))
def test_adding_work_reduces_idle(rates, T, extra):
    if any(abs(extra - r) <= 1e-3 for r in rates):
        return
    before = residual_deficit(rates, T)
    after = residual_deficit(rates + [extra], T)
    assert 0.0 <= after <= before <= T
    if after > 1e-9:
        assert after < before


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.2, 3.0), min_size=1, max_size=4), st.floats(0.3, 3.0))
def test_subset_monotone_and_bounded(rates, T):
    spec = single(rates, T=T)
    values = {S: idle_time_expected(S, spec).value for S in subsets(spec.task_ids)}
    for S, v in values.items():
        assert 0.0 <= v <= T
        for n in spec.task_ids:
            if n not in S:
                bigger = tuple(sorted(S + (n,)))
                assert values[bigger] <= v + 1e-12
