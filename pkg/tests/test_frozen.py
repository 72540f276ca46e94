import numpy as np
import pytest

from parametrix.coefficients import example_catalog
from parametrix.errors import DomainError
from parametrix.family import Stable1Family
from parametrix.frozen import FrozenKernelEvaluator, FrozenSymbol, delta_increment


@pytest.fixture(scope="module")
def ex1_eval():
    c, _, _ = example_catalog("ex1")
    return c, FrozenKernelEvaluator(FrozenSymbol(c, 0.5))


def test_closed_symbol_matches_quadrature():
    c, _, _ = example_catalog("ex1")
    xi = np.array([-30.0, -1.0, 0.2, 1.0, 7.0])
    closed = FrozenSymbol(c, 0.5)
    quad = FrozenSymbol(c, 0.5, force_quadrature=True)
    assert closed.closed_form and not quad.closed_form
    assert np.allclose(closed(xi), quad(xi), rtol=1e-6, atol=1e-8)


def test_symbol_is_hermitian_with_nonnegative_real_part(ex1_eval):
    _, ev = ex1_eval
    xi = np.geomspace(1e-3, 1e3, 20)
    s = ev.symbol
    assert np.allclose(s(-xi), np.conj(s(xi)))
    assert np.all(s(xi).real >= 0)


def test_density_matches_stable_family(ex1_eval):
    c, ev = ex1_eval
    fam = Stable1Family.from_coeffs(c)
    a = float(c.product.a(0.5))
    u = np.linspace(-3.0, 3.0, 41)
    for t in (0.01, 0.1):
        assert np.allclose(ev.density(t, 0.0, u), fam.g(a * t, u), rtol=1e-6, atol=1e-9)


def test_derivatives_by_finite_differences(ex1_eval):
    _, ev = ex1_eval
    t, x, y, h = 0.05, 0.0, np.array([-0.3, 0.2, 1.1]), 1e-4
    d1 = ev.derivative(t, x, y, 1)
    fd = (ev.density(t, x + h, y) - ev.density(t, x - h, y)) / (2 * h)
    assert np.allclose(d1, fd, rtol=1e-5, atol=1e-7)
    ht = 1e-4
    dt = ev.time_derivative(t, x, y)
    fdt = (ev.density(t + ht, x, y) - ev.density(t - ht, x, y)) / (2 * ht)
    assert np.allclose(dt, fdt, rtol=1e-4, atol=1e-5)


def test_delta_increment_small_jump(ex1_eval):
    _, ev = ex1_eval
    z = 1e-3
    d = delta_increment(ev, 1.0, 0.05, 0.0, 0.3, z)
    # second-order Taylor remainder
    assert d == pytest.approx(0.5 * z * z * float(ev.derivative(0.05, 0.0, 0.3, 2)), rel=1e-2)


def test_rejects_bad_arguments(ex1_eval):
    _, ev = ex1_eval
    with pytest.raises(DomainError):
        ev.evaluate(0.0, [0.1])
    with pytest.raises(DomainError):
        ev.evaluate(0.1, [0.1], order=5)
