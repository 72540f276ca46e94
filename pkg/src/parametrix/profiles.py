"""Radial Levy profiles and the scale functions derived from them.

For a non-increasing profile nu on (0, inf) in dimension d:

    h(r)  = int (1 ^ |x|^2 / r^2) nu(|x|) dx
    K(r)  = r^-2 int_{|x|<r} |x|^2 nu(|x|) dx
    r_t   = h^{-1}(1 / t)
    Ups_t(x) = min(r_t^-d, t K(|x|) / |x|^d)

All d-dimensional integrals are reduced to radial ones with the surface
factor omega_d = 2 pi^{d/2} / Gamma(d/2).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, special

from .errors import DomainError, QuadratureError, RangeError
from .reports import VerificationReport


@dataclass(frozen=True)
class QuadConfig:
    epsabs: float = 1e-13
    epsrel: float = 1e-8
    limit: int = 200


def omega(d: int) -> float:
    """Surface area of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def _quad(f, a, b, cfg: QuadConfig, points=None) -> float:
    kw = dict(epsabs=cfg.epsabs, epsrel=cfg.epsrel, limit=cfg.limit, full_output=1)
    if points is not None and np.isfinite(b):
        pts = [p for p in points if a < p < b]
        if pts:
            kw["points"] = pts
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(f, a, b, **kw)
    val, err = out[0], out[1]
    if len(out) > 3 or not np.isfinite(val):
        tol = max(cfg.epsabs, cfg.epsrel * abs(val))
        if not np.isfinite(val) or err > 100 * tol:
            raise QuadratureError("radial quadrature did not converge", val, err)
    return val


@dataclass(frozen=True, eq=False)
class LevyProfile:
    """Radial Levy density profile nu with optional closed-form scale functions."""

    nu: Callable[[float], float]
    dimension: int = 1
    closed_form_h: Optional[Callable[[float], float]] = None
    closed_form_K: Optional[Callable[[float], float]] = None
    quad_cfg: QuadConfig = field(default_factory=QuadConfig)
    name: str = "custom"
    breakpoints: tuple = ()
    alpha_h: Optional[float] = None  # declared lower scaling index, if known
    C_h: Optional[float] = None
    power_law: Optional[tuple] = None  # (alpha, scale) when nu(r) = scale r^{-d-alpha}

    def __post_init__(self):
        if self.dimension < 1:
            raise DomainError("dimension must be a positive integer")
        object.__setattr__(self, "_h_cache", lru_cache(maxsize=65536)(self._h_quad))
        object.__setattr__(self, "_k_cache", lru_cache(maxsize=65536)(self._k_quad))

    # radial integrands -------------------------------------------------
    def _radial(self, x: float) -> float:
        return x ** (self.dimension - 1) * float(self.nu(x))

    def _splits(self, a: float, b: float) -> list:
        return [p for p in (1.0, *self.breakpoints) if a < p < b]

    def _piecewise(self, f, a: float, b: float) -> float:
        """Integrate over [a, b] in the variable log x, split at breakpoints."""
        total = 0.0
        if a == 0.0:
            c = b * 1e-12
            total += _quad(f, 0.0, c, self.quad_cfg)
            a = c
        cuts = np.log([a, *sorted(self._splits(a, b)), b])
        g = lambda y: f(math.exp(y)) * math.exp(y)  # noqa: E731
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            n = max(1, int(math.ceil((hi - lo) / math.log(10.0))))
            for u, v in zip(np.linspace(lo, hi, n + 1)[:-1], np.linspace(lo, hi, n + 1)[1:]):
                total += _quad(g, u, v, self.quad_cfg)
        return total

    def _h_quad(self, r: float) -> float:
        inner = self._piecewise(lambda x: x * x * self._radial(x), 0.0, r) / (r * r)
        hi = 2.0 * max(r, 1.0)
        tail = _quad(lambda y: self._radial(math.exp(y)) * math.exp(y), math.log(hi), 700.0, self.quad_cfg)
        outer = self._piecewise(self._radial, r, hi) + tail
        return omega(self.dimension) * (inner + outer)

    def _k_quad(self, r: float) -> float:
        inner = self._piecewise(lambda x: x * x * self._radial(x), 0.0, r)
        return omega(self.dimension) * inner / (r * r)

    # public scale functions --------------------------------------------
    def h(self, r):
        """h(r); accepts scalars or arrays of positive radii."""
        return _vectorize(self._h_scalar, r)

    def K(self, r):
        return _vectorize(self._k_scalar, r)

    def _h_scalar(self, r: float) -> float:
        if not r > 0:
            raise DomainError("h requires r > 0")
        if self.closed_form_h is not None:
            return float(self.closed_form_h(r))
        return self._h_cache(float(r))

    def _k_scalar(self, r: float) -> float:
        if not r > 0:
            raise DomainError("K requires r > 0")
        if self.closed_form_K is not None:
            return float(self.closed_form_K(r))
        return self._k_cache(float(r))

    def h_quadrature(self, r: float) -> float:
        """h(r) by quadrature even when a closed form is present."""
        return self._h_cache(float(r))

    def K_quadrature(self, r: float) -> float:
        return self._k_cache(float(r))

    @property
    def t0(self) -> float:
        """Reference horizon 1 / h(1)."""
        return 1.0 / self._h_scalar(1.0)

    def r_t(self, t):
        return _vectorize(self._r_t_scalar, t)

    def _r_t_scalar(self, t: float) -> float:
        if not t > 0:
            raise DomainError("r_t requires t > 0")
        return _r_t_cached(self, float(t))

    def h_inverse(self, value: float, rtol: float = 1e-10, max_iter: int = 200) -> float:
        """Solve h(r) = value by bisection in log r with bracket doubling."""
        if not value > 0:
            raise DomainError("h^{-1} requires a positive value")
        lo, hi = 1.0, 1.0
        for _ in range(max_iter):
            if self._h_scalar(lo) >= value:
                break
            lo *= 0.5
        else:
            raise RangeError("lower bracket for h^{-1} not found")
        for _ in range(max_iter):
            if self._h_scalar(hi) <= value:
                break
            hi *= 2.0
        else:
            raise RangeError("upper bracket for h^{-1} not found")
        for _ in range(max_iter):
            mid = math.sqrt(lo * hi)
            if self._h_scalar(mid) > value:
                lo = mid
            else:
                hi = mid
            if hi / lo - 1.0 < rtol:
                break
        return math.sqrt(lo * hi)

    # invariants --------------------------------------------------------
    def check_invariants(self, r_grid: Optional[np.ndarray] = None, rtol: float = 1e-6) -> VerificationReport:
        """Sampled monotonicity, integrability and closed-form agreement."""
        rep = VerificationReport("profile_invariants")
        r = np.geomspace(1e-4, 1e2, 121) if r_grid is None else np.asarray(r_grid)
        vals = np.array([float(self.nu(x)) for x in r])
        dec = np.max(np.diff(vals) / np.maximum(vals[:-1], 1e-300), initial=0.0)
        rep.add("nu_monotone", max(dec, 0.0), rtol)
        if dec > rtol:
            rep.passed = False
            rep.notes.append("nu increases on the sample grid")
        try:
            self.h_quadrature(1.0)
        except QuadratureError as exc:
            rep.passed = False
            rep.notes.append(f"integrability check failed: {exc}")
        if self.closed_form_h is not None:
            for x in np.geomspace(1e-3, 10.0, 9):
                q = self.h_quadrature(x)
                c = float(self.closed_form_h(x))
                rel = abs(q - c) / abs(c)
                rep.add({"r": x}, rel, rtol)
                if rel > rtol:
                    rep.passed = False
        return rep


@lru_cache(maxsize=65536)
def _r_t_cached(profile: LevyProfile, t: float) -> float:
    return profile.h_inverse(1.0 / t)


def _vectorize(fn, x):
    if np.ndim(x) == 0:
        return fn(float(x))
    arr = np.asarray(x, dtype=float)
    return np.array([fn(float(v)) for v in arr.ravel()]).reshape(arr.shape)


# ---------------------------------------------------------------------------
# bound function and error functions


def upsilon(profile: LevyProfile, t: float, x) -> np.ndarray:
    """Bound function min(r_t^-d, t K(|x|) / |x|^d); radial in x."""
    d = profile.dimension
    x = np.asarray(x, dtype=float)
    norm = np.abs(x) if d == 1 or x.ndim == 0 else np.linalg.norm(x, axis=-1)
    cap = profile.r_t(t) ** (-d)
    out = np.full(norm.shape, cap, dtype=float)
    nz = norm > 0
    if np.any(nz):
        kv = profile.K(norm[nz])
        out[nz] = np.minimum(cap, t * kv / norm[nz] ** d)
    return out if out.ndim else float(out)


def rho_error(profile: LevyProfile, gamma: float, beta: float, t: float, x, shift=0.0) -> np.ndarray:
    """r_t^gamma (|x|^beta ^ 1) t^-1 Ups_t(x - shift) for t in (0, t0]."""
    if not 0.0 <= beta <= 2.0:
        raise DomainError("beta must lie in [0, 2]")
    if not 0.0 < t <= profile.t0 * (1 + 1e-12):
        raise DomainError(f"t={t} outside (0, t0] with t0={profile.t0}")
    x = np.asarray(x, dtype=float)
    norm = np.abs(x) if profile.dimension == 1 else np.linalg.norm(x, axis=-1)
    holder = np.minimum(norm ** beta, 1.0) if beta > 0 else np.ones_like(norm)
    return profile.r_t(t) ** gamma * holder * upsilon(profile, t, x - shift) / t


def check_condition_R(profile: LevyProfile, t_grid: Sequence[float], lambda_grid: Sequence[float],
                      rtol: float = 1e-9) -> VerificationReport:
    """Verify r_{lambda t} <= sqrt(lambda) r_t on the product grid."""
    rep = VerificationReport("condition_R")
    for t in t_grid:
        rt = profile.r_t(t)
        for lam in lambda_grid:
            rep.add({"t": float(t), "lambda": float(lam)}, profile.r_t(lam * t), math.sqrt(lam) * rt)
    rep.passed = rep.max_ratio <= 1.0 + rtol
    rep.fitted["max_ratio"] = rep.max_ratio
    return rep


# ---------------------------------------------------------------------------
# weak scaling


@dataclass(frozen=True)
class ScalingCertificate:
    alpha_h: float
    C_h: float
    grid: tuple
    max_violation: float
    passed: bool


def scaling_certificate(profile: LevyProfile, alpha_h: float, C_h: Optional[float] = None,
                        n: int = 32, r_min: float = 1e-4, lam_min: float = 1e-4,
                        rtol: float = 1e-6) -> ScalingCertificate:
    """Sample h(r) <= C_h lambda^alpha_h h(lambda r) on an n x n log grid in (0,1]^2.

    With C_h omitted the smallest admissible constant is fitted (at least 1).
    """
    if not 0 < alpha_h <= 2:
        raise DomainError("alpha_h must lie in (0, 2]")
    lams = np.geomspace(lam_min, 1.0, n)
    rs = np.geomspace(r_min, 1.0, n)
    hr = profile.h(rs)
    worst = 0.0
    for lam in lams:
        ratio = hr / (lam ** alpha_h * profile.h(lam * rs))
        worst = max(worst, float(ratio.max()))
    fitted = max(1.0, worst)
    if C_h is None:
        return ScalingCertificate(alpha_h, fitted, (lams, rs), 0.0, True)
    viol = max(0.0, worst / C_h - 1.0)
    return ScalingCertificate(alpha_h, float(C_h), (lams, rs), viol, viol <= rtol)


def estimate_alpha_h(profile: LevyProfile, n: int = 32, r_min: float = 1e-4) -> float:
    """Largest exponent with a bounded constant on the sample grid (heuristic)."""
    rs = np.geomspace(r_min, 1.0, n)
    hr = np.log(profile.h(rs))
    lr = np.log(rs)
    slopes = -(hr[:, None] - hr[None, :]) / (lr[:, None] - lr[None, :] + np.eye(n))
    mask = ~np.eye(n, dtype=bool)
    return float(np.min(slopes[mask]))


# ---------------------------------------------------------------------------
# lemma checks on profiles


def check_drift_lemma(profile: LevyProfile, alpha_h: float, C_h: float,
                      r_grid: Optional[np.ndarray] = None) -> VerificationReport:
    """int_{r<=|z|<1} |z| nu(|z|) dz <= (2 C_h / (1 - alpha_h)) r^alpha_h h(r)."""
    if not alpha_h < 1:
        raise DomainError("the drift lemma needs alpha_h < 1")
    rep = VerificationReport("drift_lemma")
    r_grid = np.geomspace(1e-4, 1.0, 33) if r_grid is None else np.asarray(r_grid)
    d = profile.dimension
    for r in r_grid:
        if r >= 1.0:
            lhs = 0.0
        else:
            lhs = omega(d) * profile._piecewise(lambda x: x * profile._radial(x), r, 1.0)
        rhs = 2.0 * C_h / (1.0 - alpha_h) * r ** alpha_h * profile.h(r)
        rep.add({"r": float(r)}, lhs, rhs)
    rep.passed = rep.max_ratio <= 1.0
    return rep


def time_convolution_lhs(profile: LevyProfile, t: float, eps: float, k: float, level: int = 7) -> float:
    """int_0^t (t-s)^-1 r_{t-s}^eps s^-1 r_s^{k eps} ds by tanh-sinh quadrature."""
    from .quadrature import tanh_sinh

    def f(s):
        return np.array([profile.r_t(t - v) ** eps * profile.r_t(v) ** (k * eps) / ((t - v) * v) for v in s])

    return tanh_sinh(f, 0.0, t, level=level)


def time_convolution_rhs(profile: LevyProfile, t: float, eps: float, k: float) -> float:
    return special.beta(eps / 2.0, k * eps / 2.0) * profile.r_t(t) ** ((k + 1) * eps) / t


def check_time_convolution(profile: LevyProfile, samples: Sequence[tuple]) -> VerificationReport:
    """Sampled check of the Beta-function bound for the time convolution."""
    rep = VerificationReport("time_convolution")
    for t, eps, k in samples:
        rep.add({"t": t, "eps": eps, "k": k}, time_convolution_lhs(profile, t, eps, k),
                time_convolution_rhs(profile, t, eps, k))
    rep.passed = rep.max_ratio <= 1.0
    return rep


# ---------------------------------------------------------------------------
# profile catalog


def power_profile(alpha: float, dimension: int = 1, scale: float = 1.0) -> LevyProfile:
    """nu(r) = scale * r^{-d-alpha} with closed-form h and K."""
    if not 0 < alpha < 2:
        raise DomainError("alpha must lie in (0, 2)")
    d = dimension
    w = omega(d) * scale
    return LevyProfile(
        nu=lambda r: scale * r ** (-d - alpha),
        dimension=d,
        closed_form_h=lambda r: w * r ** (-alpha) * (1.0 / (2.0 - alpha) + 1.0 / alpha),
        closed_form_K=lambda r: w * r ** (-alpha) / (2.0 - alpha),
        name=f"power-{alpha:g}",
        alpha_h=alpha,
        C_h=1.0,
        power_law=(alpha, scale),
    )


def log_profile(kind: str, eps: float = 0.5) -> LevyProfile:
    """nu(r) = r^{-2} phi(r) in d = 1 with logarithmic phi.

    kind 'log_decay': phi = 1 / log(2 + 1/r)^{1+eps}
    kind 'log_inv':   phi = 1 / log(2 + 1/r)
    kind 'log_grow':  phi = log(2 + 1/r)
    """
    if kind == "log_decay":
        phi = lambda r: 1.0 / math.log(2.0 + 1.0 / r) ** (1.0 + eps)  # noqa: E731
    elif kind == "log_inv":
        phi = lambda r: 1.0 / math.log(2.0 + 1.0 / r)  # noqa: E731
    elif kind == "log_grow":
        phi = lambda r: math.log(2.0 + 1.0 / r)  # noqa: E731
    else:
        raise KeyError(kind)
    return LevyProfile(nu=lambda r: phi(r) / (r * r), dimension=1, name=kind)


def _log_double_factorial(k: int, step: int) -> float:
    # (step*k)!! with step-fold product step^k k!
    return k * math.log(step) + math.lgamma(k + 1)


def oscillating_phi(r: float, step: int) -> float:
    """Piecewise power profile alternating between r^-1/4 and r^1/4 pieces.

    For step = 2 the breakpoints are 1/n! with n = 2k, 2k+1, 2k+2; for step = 3
    they are 1/n! with n = 3k, 3k+2, 3k+3.  phi vanishes for r > 1.
    """
    if r > 1.0:
        return 0.0
    if r <= 0:
        return math.inf
    lr = -math.log(r)
    k = 0
    while True:
        a = math.lgamma(step * k + 1)
        mid = math.lgamma(step * k + step) if step == 3 else math.lgamma(2 * k + 2)
        end = math.lgamma(step * k + step + 1)
        log_ck = -0.5 * _log_double_factorial(k, step)
        if lr < a:
            k -= 1
            continue
        if lr <= mid:
            return math.exp(log_ck + 0.25 * lr)
        if lr <= end:
            return math.exp(log_ck + 0.5 * mid - 0.25 * lr)
        k += 1


def oscillating_profile(step: int = 2) -> LevyProfile:
    """Profile nu(r) = r^-2 phi(r) with lower/upper indices 3/4 and 5/4."""
    if step not in (2, 3):
        raise KeyError(step)
    bps = tuple(math.exp(-math.lgamma(n + 1)) for n in range(2, 12))
    return LevyProfile(nu=lambda r: oscillating_phi(r, step) / (r * r), dimension=1,
                       name=f"oscillating-{step - 1}", breakpoints=bps, alpha_h=0.75,
                       quad_cfg=QuadConfig(epsabs=1e-12, epsrel=1e-7, limit=500))


def piecewise_power_profile(r_nodes: Sequence[float], nu_values: Sequence[float],
                            dimension: int = 1) -> LevyProfile:
    """Profile interpolated as a power law between table rows (log-log linear).

    Outside the table the first and last segment exponents are extended.
    """
    r = np.asarray(r_nodes, dtype=float)
    v = np.asarray(nu_values, dtype=float)
    if r.ndim != 1 or r.size < 2 or np.any(np.diff(r) <= 0) or np.any(r <= 0):
        raise DomainError("table radii must be positive and strictly increasing")
    if np.any(v <= 0) or np.any(np.diff(v) > 0):
        raise DomainError("table values must be positive and non-increasing")
    lr, lv = np.log(r), np.log(v)
    slopes = np.diff(lv) / np.diff(lr)

    def nu(x: float) -> float:
        lx = math.log(x)
        i = int(np.clip(np.searchsorted(lr, lx) - 1, 0, len(slopes) - 1))
        return math.exp(lv[i] + slopes[i] * (lx - lr[i]))

    return LevyProfile(nu=nu, dimension=dimension, name="table", breakpoints=tuple(r.tolist()))
