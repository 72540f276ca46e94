import math

import numpy as np
import pytest

from parametrix.errors import DomainError
from parametrix.profiles import (check_time_convolution, estimate_alpha_h, log_profile, oscillating_profile,
                                 power_profile, scaling_certificate, upsilon)


def test_power_profile_closed_form_matches_quadrature():
    prof = power_profile(1.0)
    for r in (0.01, 0.3, 1.0, 4.0):
        assert prof.h(r) == pytest.approx(prof.h_quadrature(r), rel=1e-7)
        assert prof.K(r) == pytest.approx(prof.K_quadrature(r), rel=1e-7)


def test_cauchy_scales():
    prof = power_profile(1.0)
    assert prof.h(1.0) == pytest.approx(4.0)
    assert prof.t0 == pytest.approx(0.25)
    for t in (1e-3, 0.05, 0.25):
        assert float(prof.r_t(t)) == pytest.approx(4 * t, rel=1e-10)


def test_r_t_inverts_h():
    prof = log_profile("log_decay", 0.5)
    for t in (1e-3, 1e-2, 0.1):
        r = float(prof.r_t(t))
        assert float(prof.h(r)) == pytest.approx(1.0 / t, rel=1e-8)


def test_h_is_decreasing():
    for prof in (power_profile(0.7), log_profile("log_inv"), oscillating_profile(2)):
        r = np.geomspace(1e-3, 10.0, 25)
        assert np.all(np.diff(prof.h(r)) < 0)


def test_invalid_arguments():
    with pytest.raises(DomainError):
        power_profile(2.5)
    with pytest.raises(DomainError):
        power_profile(1.0).h(0.0)
    with pytest.raises(DomainError):
        power_profile(1.0).r_t(-1.0)


def test_scaling_certificate_power_law():
    prof = power_profile(1.0)
    assert scaling_certificate(prof, 1.0, 1.0).passed
    assert not scaling_certificate(prof, 1.5, 1.0).passed
    assert estimate_alpha_h(prof) == pytest.approx(1.0, abs=1e-6)


def test_upsilon_is_min_of_levels():
    prof = power_profile(1.0)
    t = 0.05
    x = np.array([0.0, 0.01, 0.5, 3.0])
    ups = upsilon(prof, t, x)
    r_t = float(prof.r_t(t))
    near = 1.0 / r_t
    assert ups[0] == pytest.approx(near)
    assert np.all(ups <= near + 1e-12)
    assert np.all(np.diff(ups) <= 0)


def test_time_convolution_bound_holds():
    rep = check_time_convolution(power_profile(1.0), [(0.1, 0.5, 1.0), (0.05, 0.2, 2.0), (0.2, 0.8, 0.5)])
    assert rep.passed
    assert 0 < rep.max_ratio <= 1.0
    assert not math.isnan(rep.max_ratio)
