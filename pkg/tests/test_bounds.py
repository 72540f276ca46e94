import numpy as np
import pytest

from parametrix.bounds import (check_composite_shift, check_conv_lemma_a, check_drift_swap, envelope_spec,
                               example_ex1_shape, fit_constant, fit_envelope, pointwise_bound, rho_sum)
from parametrix.coefficients import example_catalog
from parametrix.errors import AssumptionViolation, DomainError
from parametrix.oracles import cauchy_closed_form


def test_envelope_spec_ex1(ex1):
    c, p, ah = ex1
    spec = envelope_spec(c, p, ah, "y", 0.175)
    assert spec.terms[0] == (0.0, 0.0)
    assert spec.eta == pytest.approx(0.7)


def test_pointwise_bound_requires_positive_eta(ex1):
    c, p, ah = ex1
    spec = envelope_spec(c, p, ah)
    bad = spec.__class__("y", spec.terms, -0.1)
    with pytest.raises(AssumptionViolation):
        pointwise_bound(bad, c, 0.05, 0.0, 0.1)
    with pytest.raises(DomainError):
        rho_sum(spec, c, 1.0, 0.0, 0.1)


def test_fit_envelope_is_tight(ex1, ex1_coarse):
    c, p, ah = ex1
    spec = envelope_spec(c, p, ah, "y", 0.175)
    fit = fit_envelope(ex1_coarse.p, spec, c)
    assert np.isfinite(fit.c) and fit.c > 0 and not fit.violations
    scaled = spec.with_scale(fit.c)
    T = ex1_coarse.p
    X, Y = np.meshgrid(T.x_grid, T.y_grid, indexing="ij")
    for i, t in enumerate(T.t_grid):
        assert np.all(T.values[i] <= pointwise_bound(scaled, c, float(t), X, Y) * (1 + 1e-12))


def test_cauchy_envelope_constant_bounded():
    c, p, ah = example_catalog("cauchy-const")
    spec = envelope_spec(c, p, ah)
    u = np.linspace(-5, 5, 101)
    for t in (0.01, 0.1, 0.25):
        b = pointwise_bound(spec, c, t, 0.0, u)
        ratio = cauchy_closed_form(t, 0.0, u) / b
        assert 0.01 < ratio.max() < 10


def test_fit_constant():
    assert fit_constant(np.array([1.0, -3.0]), np.array([2.0, 2.0])) == pytest.approx(1.5)
    assert fit_constant(np.array([1.0]), np.array([0.0])) == np.inf


def test_ex1_shape_positive(ex1):
    c, _, _ = ex1
    v = example_ex1_shape(c, 0.05, 0.0, np.linspace(-1, 2, 31), 0.9)
    assert np.all(v > 0)


def test_conv_lemma_and_shift_checks(ex1):
    c, _, _ = ex1
    rep = check_conv_lemma_a(c.profile, c, 0.5, 0.5, [0.01, 0.1])
    assert rep.passed and np.isfinite(rep.fitted["c1"])
    xs = np.linspace(-1, 2, 7)
    assert check_drift_swap(c, [0.01, 0.1], xs, xs).passed
    assert check_composite_shift(c, [0.05], xs, xs).passed
