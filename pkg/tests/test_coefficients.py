import numpy as np
import pytest

from parametrix.coefficients import (CATALOG_NAMES, DriftParameters, check_assumptions, check_holder_drift,
                                     epsilon0_window, eta_exponent, ex1_a, example_catalog)
from parametrix.errors import AssumptionViolation, DomainError


def test_ex1_coefficient_shape():
    assert ex1_a(-1.0) == 1.0
    assert ex1_a(0.25) == pytest.approx(1.5)
    assert ex1_a(3.0) == 2.0
    c, params, ah = example_catalog("ex1")
    assert c.product.k_sides == (0.5, 1.5)
    assert (params.sigma, params.pairs) == (0.9, ((0.5, 0.9),))
    assert ah == 1.0


def test_eps0_window_for_ex1():
    c, params, ah = example_catalog("ex1")
    win = epsilon0_window(params, ah, c.eps_kappa)
    # min over j of (alpha_h ^ sigma eps_j) + s_j - 1 with the j = 0 pair (1/2, 1)
    assert win.hi == pytest.approx(0.35)
    assert win.midpoint == pytest.approx(0.175)
    assert eta_exponent(params, ah, c.eps_kappa) == pytest.approx(0.7)


def test_empty_window_raises():
    params = DriftParameters(0.2, ((0.5, 0.5),), "A_star")
    with pytest.raises(AssumptionViolation):
        epsilon0_window(params, 1.0, 0.5)


def test_variant_A_caps_window():
    params = DriftParameters(0.9, ((1.0, 1.0),), "A")
    win = epsilon0_window(params, 0.5, 1.0)
    # pair terms give 0.5, the variant cap alpha_h + sigma - 1 gives 0.4 (closed end)
    assert win.hi == pytest.approx(0.4) and win.hi_closed
    assert win.contains(win.hi) and not win.contains(0.0)


def test_drift_parameter_validation():
    with pytest.raises(DomainError):
        DriftParameters(1.5, ())
    with pytest.raises(DomainError):
        DriftParameters(0.5, ((0.0, 1.0),))
    with pytest.raises(DomainError):
        DriftParameters(0.5, (), "B")


def test_effective_drift_product_form_closed_form():
    # k = 1.5 on z > 0 and 0.5 on z < 0, J = z^-2: b_r = a(x) (1.5 - 0.5) log r
    c, _, _ = example_catalog("ex1")
    for r in (0.01, 0.3, 2.0):
        assert c.effective_drift(0.5, r) == pytest.approx(ex1_a(0.5) * np.log(r), rel=1e-8)


def test_generic_path_matches_product_path():
    c, _, _ = example_catalog("ex1")
    generic = c.__class__(b=c.b, kappa=c.kappa, J=c.J, profile=c.profile, c_kappa=3.0, eps_kappa=0.5,
                          z_breakpoints=c.z_breakpoints)
    for r in (0.05, 0.5, 3.0):
        assert generic.effective_drift(0.25, r) == pytest.approx(c.effective_drift(0.25, r), rel=1e-7)


def test_holder_drift_passes_for_ex1():
    c, params, _ = example_catalog("ex1")
    assert check_holder_drift(c, params).passed


def test_assumption_bundle_ex1_and_failure():
    c, p, ah = example_catalog("ex1")
    assert all(r.passed for r in check_assumptions(c, p, ah))
    c, p, ah = example_catalog("ex1", sigma=1.0, s=1.0)
    failed = {r.check for r in check_assumptions(c, p, ah) if not r.passed}
    assert failed == {"cancellation_scale"}


def test_catalog_entries_construct():
    for name in CATALOG_NAMES:
        c, p, ah = example_catalog(name)
        assert c.name == name
        assert 0 < ah <= 2
    with pytest.raises(KeyError):
        example_catalog("nope")
