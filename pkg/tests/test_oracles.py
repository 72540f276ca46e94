import numpy as np
import pytest

from parametrix.errors import BudgetError, DomainError
from parametrix.oracles import (SuiteTolerances, cauchy_cdf, cauchy_closed_form, compare, default_probes,
                                frozen_kernel_table, mc_vs_cauchy, monte_carlo_density, q0_oracle,
                                run_residual_suite)


def test_compare_semantics():
    r = compare("x", {}, 1.0, 1.0005, abs_tol=1e-3)
    assert r.passed and r.record()["type"] == "oracle"
    assert not compare("x", {}, 1.0, 1.1, rel_tol=1e-2).passed


def test_cauchy_cdf_consistent_with_density():
    t = 0.05
    u = np.linspace(-2, 2, 9)
    h = 1e-6
    d = (cauchy_cdf(t, u + h) - cauchy_cdf(t, u - h)) / (2 * h)
    assert np.allclose(d, cauchy_closed_form(t, 0.0, u), rtol=1e-6)


def test_q0_oracle_vanishes_for_constant_coefficients(cauchy_const):
    c, _, _ = cauchy_const
    assert q0_oracle(c, 0.05, 0.0, 0.3) == pytest.approx(0.0, abs=1e-10)


def test_residual_suite_on_exact_cauchy_table(cauchy_const):
    c, _, _ = cauchy_const
    x = np.linspace(-4, 4, 161)
    T = frozen_kernel_table(c, [0.02, 0.04], x)
    res = run_residual_suite(T, default_probes(x), SuiteTolerances(), [(0.02, 0.04)])
    names = {r.name for r in res}
    assert {"mass", "positivity", "chapman_kolmogorov", "contraction"} <= names
    assert all(r.passed for r in res)


def test_fault_injection_is_detected(cauchy_const):
    """A truncated Fourier integral breaks the residual checks."""
    c, _, _ = cauchy_const
    x = np.linspace(-4, 4, 161)
    T = frozen_kernel_table(c, [0.02, 0.04], x, xi_cutoff=5.0)
    res = run_residual_suite(T, default_probes(x), SuiteTolerances(), [(0.02, 0.04)])
    assert not all(r.passed for r in res)


def test_monte_carlo_small(cauchy_const):
    c, _, _ = cauchy_const
    h1 = monte_carlo_density(c, 0.05, 0.0, 20_000, 1e-2, rng_seed=7)
    h2 = monte_carlo_density(c, 0.05, 0.0, 20_000, 1e-2, rng_seed=7)
    assert np.array_equal(h1.density, h2.density)
    assert mc_vs_cauchy(h1, 0.05, 0.0)["fraction_within"] > 0.8
    with pytest.raises(DomainError):
        monte_carlo_density(c, 0.05, 0.0, 10, 0.0)
    with pytest.raises(BudgetError):
        monte_carlo_density(c, 0.05, 0.0, 10_000_000, 1e-6)
