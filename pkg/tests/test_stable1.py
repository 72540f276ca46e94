import numpy as np
import pytest
from scipy import integrate
from scipy.stats import levy_stable

from parametrix.coefficients import example_catalog
from parametrix.family import Stable1Family
from parametrix.stable1 import standard

V = np.array([-40.0, -3.0, -0.5, 0.0, 0.7, 2.5, 10.0, 300.0])


@pytest.mark.parametrize("beta", [-0.5, 0.0, 0.5, 0.9])
def test_matches_scipy(beta):
    law = standard(beta)
    ref = levy_stable.pdf(V[1:-1], 1.0, beta)
    assert law.pdf(V[1:-1]) == pytest.approx(ref, rel=1e-6, abs=1e-10)
    assert law.cdf(V[1:-1]) == pytest.approx(levy_stable.cdf(V[1:-1], 1.0, beta), abs=1e-7)


def test_cdf_and_sf_are_complementary():
    law = standard(0.5)
    assert law.cdf(V) + law.sf(V) == pytest.approx(np.ones_like(V), abs=1e-12)
    assert law.mass(-1e9, 1e9) == pytest.approx(1.0, abs=1e-8)


def test_tails_are_power_law():
    law = standard(0.5)
    v = np.array([1e5, 1e6])
    assert law.pdf(v) * v ** 2 == pytest.approx((1.5 / np.pi) * np.ones(2), rel=1e-3)
    assert law.pdf(-v) * v ** 2 == pytest.approx((0.5 / np.pi) * np.ones(2), rel=1e-3)


def test_partial_moment_derivative():
    law = standard(0.5)
    v = np.array([-2.0, 0.3, 4.0])
    h = 1e-5
    d = (law.g1(v + h) - law.g1(v - h)) / (2 * h)
    assert d == pytest.approx(v * law.pdf(v), rel=1e-5, abs=1e-9)


def test_family_cell_integrals_match_quadrature():
    c, _, _ = example_catalog("ex1")
    fam = Stable1Family.from_coeffs(c)
    s, lo, hi = 0.03, -0.1, 0.25
    m = integrate.quad(lambda u: float(fam.g(s, u)), lo, hi, limit=200, epsabs=1e-13)[0]
    m1 = integrate.quad(lambda u: u * float(fam.g(s, u)), lo, hi, limit=200, epsabs=1e-13)[0]
    assert float(fam.mass(s, lo, hi)) == pytest.approx(m, rel=1e-7)
    assert float(fam.moment1(s, lo, hi)) == pytest.approx(m1, rel=1e-6, abs=1e-12)
    h = 1e-6
    fd = (fam.mass(s + h, lo, hi) - fam.mass(s - h, lo, hi)) / (2 * h)
    assert float(fam.mass_ds(s, lo, hi)) == pytest.approx(float(fd), rel=1e-5)
    fd = (fam.g(s + h, 0.1) - fam.g(s - h, 0.1)) / (2 * h)
    assert float(fam.dg_ds(s, 0.1)) == pytest.approx(float(fd), rel=1e-5)


def test_totally_skewed_rejected():
    with pytest.raises(ValueError):
        standard(1.0)
