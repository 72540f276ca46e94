"""Frozen-coefficient Levy symbols, their Fourier-inverted kernels and generators.

Freezing the jump coefficient at w gives a Levy operator with symbol

    Psi_w(xi) = -i xi b(w) - int (e^{i xi z} - 1 - i xi z 1_{|z|<1}) kappa(w, z) J(z) dz

and transition density p_w(t, u) of the increment u = y - x,

    p_w(t, u) = (1/pi) Re int_0^inf e^{-i u xi} e^{-t Psi_w(xi)} dxi.

Power-law profiles with a piecewise-constant k get an exact symbol; every
other coefficient set uses a quadrature symbol tabulated on a log grid.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .coefficients import CoefficientSet
from .errors import DomainError, QuadratureError, ResolutionError
from .quadrature import gauss_panels

_EULER = float(np.euler_gamma)


# ---------------------------------------------------------------------------
# symbols


def power_half_symbol(alpha: float, xi):
    """I(xi) = int_0^inf (e^{i xi z} - 1 - i xi z 1_{z<1}) z^{-1-alpha} dz."""
    xi = np.asarray(xi, dtype=float)
    ax = np.abs(xi)
    with np.errstate(divide="ignore", invalid="ignore"):
        if alpha == 1.0:
            val = -0.5 * np.pi * ax + 1j * ax * (1.0 - _EULER - np.log(ax))
        else:
            val = ax ** alpha * special.gamma(-alpha) * np.exp(-0.5j * np.pi * alpha) - 1j * ax / (1.0 - alpha)
    val = np.where(ax == 0, 0.0 + 0.0j, val)
    return np.where(xi < 0, np.conj(val), val)


def _sin_minus_x(x: float) -> float:
    """sin(x) - x without cancellation."""
    if abs(x) > 0.5:
        return math.sin(x) - x
    x2 = x * x
    term, total = -x * x2 / 6.0, 0.0
    k = 3
    while abs(term) > 1e-18 * abs(total) or total == 0.0:
        total += term
        term *= -x2 / ((k + 1) * (k + 2))
        k += 2
        if k > 41:
            break
    return total


def _log_pieces(a: float, b: float, points=(), decades: float = 1.0) -> list:
    """Split [a, b] (0 < a < b <= inf) at points and every few decades, in log z."""
    hi = math.log(b) if np.isfinite(b) else 700.0
    cuts = sorted({math.log(a), hi, *[math.log(p) for p in points if a < p < b]})
    out = []
    for lo, up in zip(cuts[:-1], cuts[1:]):
        n = max(1, int(math.ceil((up - lo) / (decades * math.log(10.0)))))
        e = np.linspace(lo, up, n + 1)
        out.extend(zip(e[:-1], e[1:]))
    return out


class _SymbolQuad:
    """Quadrature symbol for a jump density K_+(z), K_-(z) on z > 0."""

    def __init__(self, k_plus, k_minus, points: tuple, epsabs: float = 1e-12, epsrel: float = 1e-9):
        self.kp, self.km = k_plus, k_minus
        self.points = tuple(sorted({abs(p) for p in points if p != 0}))
        self.epsabs, self.epsrel = epsabs, epsrel

    def _q(self, f, a, b, **kw) -> float:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(f, a, b, epsabs=self.epsabs, epsrel=self.epsrel, limit=400, **kw)
        if not np.isfinite(val) or err > 1e4 * max(self.epsabs, self.epsrel * abs(val)):
            raise QuadratureError("symbol quadrature did not converge", val, err)
        return val

    def _logq(self, f, a, b) -> float:
        g = lambda y: f(math.exp(y)) * math.exp(y)  # noqa: E731
        return sum(self._q(g, lo, hi) for lo, hi in _log_pieces(a, b, self.points, 4.0))

    def __call__(self, xi: float) -> complex:
        """-int (e^{i xi z} - 1 - i xi z 1_{|z|<1}) K(z) dz for xi > 0."""
        ks = lambda z: self.kp(z) + self.km(z)  # noqa: E731
        kd = lambda z: self.kp(z) - self.km(z)  # noqa: E731
        z1 = 1.0 / xi
        eps = min(z1, 1.0) * 1e-12
        # non-oscillatory region (0, 1/xi]: second-order remainder below |z| = 1
        re = -self._q(lambda z: 0.5 * (xi * z) ** 2 * ks(z), 0.0, eps)
        re += self._logq(lambda z: -2.0 * math.sin(0.5 * xi * z) ** 2 * ks(z), eps, z1)
        im = self._q(lambda z: -(xi * z) ** 3 / 6.0 * kd(z), 0.0, eps)
        im += self._logq(lambda z: _sin_minus_x(xi * z) * kd(z), eps, min(z1, 1.0))
        if z1 > 1.0:
            im += self._logq(lambda z: math.sin(xi * z) * kd(z), 1.0, z1)
        # oscillatory region (1/xi, inf)
        top = max(2.0 * z1, *(p * 2.0 for p in self.points))
        cuts = sorted({z1, top, *[p for p in self.points if z1 < p < top]})
        for a, b in zip(cuts[:-1], cuts[1:]):
            re += self._q(ks, a, b, weight="cos", wvar=xi)
            im += self._q(kd, a, b, weight="sin", wvar=xi)
        re += self._q(ks, top, np.inf, weight="cos", wvar=xi)
        im += self._q(kd, top, np.inf, weight="sin", wvar=xi)
        re -= self._logq(ks, z1, np.inf)
        if z1 < 1.0:
            im -= xi * self._logq(lambda z: z * kd(z), z1, 1.0)
        return -(re + 1j * im)


class _SymbolTable:
    """Interpolated quadrature symbol on a log grid in xi."""

    def __init__(self, fn, xi_min: float = 1e-6, xi_max: float = 1e5, per_decade: int = 16):
        n = int(round(per_decade * math.log10(xi_max / xi_min))) + 1
        self.lx = np.linspace(math.log(xi_min), math.log(xi_max), n)
        vals = np.array([fn(math.exp(v)) for v in self.lx])
        xi = np.exp(self.lx)
        self._re = CubicSpline(self.lx, np.log(np.maximum(vals.real, 1e-300)))
        self._im = CubicSpline(self.lx, vals.imag / xi)
        self.lo, self.hi = self.lx[0], self.lx[-1]
        self._re_slope = float(self._re(self.hi, 1))
        self._im_slope = float(self._im(self.hi, 1))

    def __call__(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        ax = np.abs(xi)
        with np.errstate(divide="ignore"):
            lx = np.log(np.maximum(ax, 1e-300))
        inside = np.clip(lx, self.lo, self.hi)
        re_l = self._re(inside) + np.where(lx > self.hi, self._re_slope * (lx - self.hi), 0.0)
        im_r = self._im(inside) + np.where(lx > self.hi, self._im_slope * (lx - self.hi), 0.0)
        # below the table: first-order behaviour Re ~ xi^2-ish is negligible, keep drift slope
        re = np.where(lx < self.lo, 0.0, np.exp(re_l))
        val = re + 1j * im_r * ax
        val = np.where(ax == 0, 0.0, val)
        return np.where(xi < 0, np.conj(val), val)


class FrozenSymbol:
    """Psi_w for a coefficient set frozen at w (dimension one)."""

    def __init__(self, coeffs: CoefficientSet, w: float, cutoff: Optional[float] = None,
                 decay_alpha: Optional[float] = None, force_quadrature: bool = False):
        self.coeffs = coeffs
        self.w = float(w)
        self.cutoff = cutoff
        prof = coeffs.profile
        self.decay_alpha = float(decay_alpha or prof.alpha_h or 1.0)
        self.drift = float(coeffs.b(self.w))
        pf = coeffs.product
        self._closed = (not force_quadrature and prof.power_law is not None and pf is not None
                        and pf.k_sides is not None)
        if self._closed:
            alpha, scale = prof.power_law
            a = float(pf.a(self.w))
            self._closed_data = (alpha, scale * a * pf.k_sides[1], scale * a * pf.k_sides[0])
            self._table = None
        else:
            self._table = self._quadrature_table(force_quadrature)

    def _quadrature_table(self, force: bool) -> _SymbolTable:
        c = self.coeffs
        pf = c.product
        if pf is not None:
            # one shared table per coefficient set for k(z) J(z); scaled by a(w)
            cache = c.__dict__.setdefault("_symbol_tables", {})
            key = ("base", force)
            if key not in cache:
                quad = _SymbolQuad(lambda z: float(pf.k(z) * c.J(z)), lambda z: float(pf.k(-z) * c.J(-z)),
                                   c.z_breakpoints + tuple(c.profile.breakpoints))
                cache[key] = _SymbolTable(quad)
            base = cache[key]
            a = float(pf.a(self.w))
            return lambda xi: a * base(xi)
        w = self.w
        quad = _SymbolQuad(lambda z: float(c.kappa(w, z) * c.J(z)), lambda z: float(c.kappa(w, -z) * c.J(-z)),
                           c.z_breakpoints + tuple(c.profile.breakpoints))
        return _SymbolTable(quad)

    @property
    def closed_form(self) -> bool:
        return self._closed

    def __call__(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if self._closed:
            alpha, cp, cm = self._closed_data
            jump = -(cp * power_half_symbol(alpha, xi) + cm * power_half_symbol(alpha, -xi))
        else:
            jump = self._table(xi)
        return -1j * xi * self.drift + jump

    def decay_constant(self) -> float:
        """min of Re Psi(xi) / |xi|^alpha over |xi| in [1, 1e3]."""
        xi = np.geomspace(1.0, 1e3, 16)
        return float(np.min(self(xi).real / xi ** self.decay_alpha))


def symbol_eval(sym: FrozenSymbol, xi):
    return sym(xi)


# ---------------------------------------------------------------------------
# Fourier inversion


@dataclass
class FourierConfig:
    abs_tol: float = 1e-12
    alias_factor: float = 200.0  # period >= alias_factor * (|u| + shift + r_t)
    max_points: int = 4_000_000
    chunk: int = 4_000_000


@dataclass
class DensityResult:
    values: np.ndarray  # clamped at zero for order 0
    raw: np.ndarray
    quad_err: np.ndarray
    clamp: float
    cutoff: float


class FrozenKernelEvaluator:
    """Evaluates p_w(t, x, y) and its x-derivatives by Fourier inversion."""

    def __init__(self, symbol: FrozenSymbol, cfg: Optional[FourierConfig] = None):
        self.symbol = symbol
        self.cfg = cfg or FourierConfig()
        self._c_lo = symbol.decay_constant()
        if not self._c_lo > 0:
            raise DomainError("symbol has no positive decay constant on [1, 1e3]")
        self.last_clamp = 0.0

    @property
    def profile(self):
        return self.symbol.coeffs.profile

    def truncation_radius(self, t: float, order: int = 0) -> float:
        """R with c t R^alpha - order log R = log(1 / abs_tol)."""
        a = self.symbol.decay_alpha
        target = math.log(1.0 / self.cfg.abs_tol)
        R = (target / (self._c_lo * t)) ** (1.0 / a)
        for _ in range(6):
            R = ((target + order * math.log(max(R, 1.0)) + 2.0) / (self._c_lo * t)) ** (1.0 / a)
        if self.symbol.cutoff is not None:
            R = min(R, self.symbol.cutoff)
        return R

    def shift(self, t: float) -> float:
        """Location of the bulk: t times the effective drift at scale r_t."""
        r = float(self.profile.r_t(t))
        xi = 1.0 / r
        return -t * float(self.symbol(np.array([xi])).imag[0]) / xi

    def _alias_estimate(self, t: float, period: float, u: np.ndarray) -> np.ndarray:
        prof = self.profile
        dist = np.maximum(period - np.abs(u) - abs(self.shift(t)), 0.5 * period)
        c = self.symbol.coeffs.c_kappa * self.symbol.coeffs.c_J
        return 2.0 * (np.pi ** 2 / 6.0) * c * t * prof.K(dist) / dist

    def _alias_correction(self, t: float, period: float, u: np.ndarray, images: int = 64) -> np.ndarray:
        """Periodic images of the density tails, t kappa(w, z) J(z) at distance m * period."""
        c = self.symbol.coeffs
        m = period * np.arange(1, images + 1)
        z = np.concatenate([u[:, None] + m[None, :], u[:, None] - m[None, :]], axis=1)
        k = np.asarray(c.kappa(self.symbol.w, z), dtype=float) * np.asarray(c.J(z), dtype=float)
        # images beyond the last one, summed as for a z^-2 tail
        rest = images * (k[:, images - 1] + k[:, -1])
        return t * (k.sum(axis=1) + rest)

    def evaluate(self, t: float, u, order: int = 0) -> DensityResult:
        """d^order/dx^order of p_w(t, x, x + u) by trapezoidal Fourier inversion."""
        if not t > 0:
            raise DomainError("t must be positive")
        if order not in (0, 1, 2, 3):
            raise DomainError("derivative order must be 0..3")
        u = np.atleast_1d(np.asarray(u, dtype=float))
        R = self.truncation_radius(t, order)
        r_t = float(self.profile.r_t(t))
        width = self.cfg.alias_factor * (float(np.max(np.abs(u))) + abs(self.shift(t)) + r_t)
        dxi = 2.0 * np.pi / width
        n = int(math.ceil(R / dxi)) + 1
        if n > self.cfg.max_points:
            raise ResolutionError(f"Fourier grid needs {n} points at t={t:g} (cap {self.cfg.max_points})")
        xi = dxi * np.arange(n)
        phi = np.exp(-t * self.symbol(xi)) * (1j * xi) ** order
        wts = np.full(n, dxi)
        wts[0] *= 0.5
        phi = phi * wts
        out = np.empty(u.shape)
        step = max(1, self.cfg.chunk // n)
        for i in range(0, u.size, step):
            uu = u[i:i + step]
            out[i:i + step] = (np.exp(-1j * np.outer(uu, xi)) @ phi).real / np.pi
        if order == 0:
            out -= self._alias_correction(t, width, u)
        err = self.cfg.abs_tol * (R ** order if order else 1.0) + 0.1 * self._alias_estimate(t, width, u)
        if order == 0:
            clamp = float(max(0.0, -np.min(out)))
            vals = np.maximum(out, 0.0)
        else:
            clamp, vals = 0.0, out
        self.last_clamp = clamp
        return DensityResult(vals, out, err, clamp, R)

    # convenience wrappers ---------------------------------------------------
    def density(self, t: float, x, y) -> np.ndarray:
        u = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        return self.evaluate(t, np.ravel(u)).values.reshape(np.shape(u))

    def derivative(self, t: float, x, y, order: int) -> np.ndarray:
        u = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        return self.evaluate(t, np.ravel(u), order).raw.reshape(np.shape(u))

    def time_derivative(self, t: float, x, y) -> np.ndarray:
        """d/dt p_w by Fourier (multiplier -Psi_w)."""
        u = np.ravel(np.asarray(y, dtype=float) - np.asarray(x, dtype=float))
        R = self.truncation_radius(t, 1)
        r_t = float(self.profile.r_t(t))
        width = self.cfg.alias_factor * (float(np.max(np.abs(u))) + abs(self.shift(t)) + r_t)
        dxi = 2.0 * np.pi / width
        xi = dxi * np.arange(int(math.ceil(R / dxi)) + 1)
        psi = self.symbol(xi)
        phi = -psi * np.exp(-t * psi) * dxi
        phi[0] *= 0.5
        return ((np.exp(-1j * np.outer(u, xi)) @ phi).real / np.pi).reshape(np.shape(np.asarray(y) - np.asarray(x)))

    # tabulated kernel for z-integrals ----------------------------------------
    def table(self, t: float, half_width: float = 400.0, oversample: int = 16):
        """Uniform-grid table of p, p', p'' in u on [-H, H] via one FFT."""
        r_t = float(self.profile.r_t(t))
        R = self.truncation_radius(t, 3)
        du = min(np.pi / R, r_t / oversample)
        period = 4.0 * half_width
        n = 1 << int(math.ceil(math.log2(period / du)))
        if n > 1 << 24:
            raise ResolutionError(f"kernel table needs {n} points at t={t:g}")
        du = period / n
        xi = 2.0 * np.pi * np.fft.fftfreq(n, d=du)
        phi = np.exp(-t * self.symbol(xi))
        phi[np.abs(xi) > R] = 0.0
        u = (np.arange(n) - n // 2) * du
        # u_m = (m - n/2) du turns e^{-i u_m xi_k} into (-1)^k times the DFT kernel
        sign = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
        tabs = []
        for order in range(4):
            spec = phi * (-1j * xi) ** order * sign  # d/du carries -i xi
            tabs.append(np.fft.fft(spec).real / period)
        keep = np.abs(u) <= half_width
        return _KernelSplines(u[keep], [v[keep] for v in tabs], half_width)

    # generator ----------------------------------------------------------------
    def apply_generator(self, v: float, t: float, x, y, r: Optional[float] = None,
                        table: Optional["_KernelSplines"] = None) -> np.ndarray:
        """L^{K_v} applied in x to p_w(t, x, y), by a direct z-integral."""
        c = self.symbol.coeffs
        r_t = float(self.profile.r_t(t))
        r = r_t if r is None else float(r)
        tab = table or self.table(t)
        u = np.ravel(np.asarray(y, dtype=float) - np.asarray(x, dtype=float))
        b = float(c.effective_drift(float(v), r))
        kz = lambda z: np.asarray(c.kappa(float(v), z), dtype=float) * np.asarray(c.J(z), dtype=float)  # noqa: E731
        H = tab.half_width
        bps = sorted({abs(p) for p in c.z_breakpoints + tuple(c.profile.breakpoints) if 0 < abs(p) < H})
        # second-order remainder only where |z| is below the kernel scale; for
        # rho <= |z| < r the gradient term is integrated separately
        rho = min(r, 0.5 * r_t)
        m1 = 0.0
        if rho < r:
            m1 = self._odd_moment(float(v), rho, r)
        small = np.unique(np.concatenate([rho * np.geomspace(1e-10, 1.0, 41), np.linspace(0.0, rho, 9),
                                          [p for p in bps if p < rho]]))
        zs, ws = gauss_panels(small, 6)
        th, wth = np.polynomial.legendre.leggauss(12)
        th, wth = 0.5 * (th + 1.0), 0.5 * wth
        out = np.empty(u.size)
        mass_out = self._outer_mass(kz, rho, bps)
        for i, uu in enumerate(u):
            acc = 0.0
            for sgn in (1.0, -1.0):
                z = sgn * zs
                k = kz(z) * ws * z * z
                g2 = tab(2, uu - th[:, None] * z[None, :])
                acc += float(np.sum(((1.0 - th) * wth) @ (g2 * k[None, :])))
                edges = self._outer_edges(rho, H, uu * sgn, r_t, bps)
                zo, wo = gauss_panels(edges, 6)
                acc += float(np.sum(tab(0, uu - sgn * zo) * kz(sgn * zo) * wo))
            acc -= tab(0, uu) * mass_out
            # d/dx p = -g'(u); the gradient part of delta on rho <= |z| < r gives -m1 d/dx p
            out[i] = (m1 - b) * tab(1, uu) + acc
        return out.reshape(np.shape(np.asarray(y) - np.asarray(x)))

    @staticmethod
    def _outer_edges(r: float, H: float, center: float, scale: float, bps) -> np.ndarray:
        geo = np.geomspace(r, H, max(2, int(24 * math.log10(H / r)) + 1))
        lo, hi = max(r, center - 40 * scale), min(H, center + 40 * scale)
        fine = np.linspace(lo, hi, int(math.ceil((hi - lo) / (scale / 4))) + 1) if hi > lo else np.array([])
        near = center + scale * np.sinh(np.linspace(-8, 8, 81))
        near = near[(near > r) & (near < H)]
        return np.unique(np.concatenate([geo, fine, near, [p for p in bps if r < p < H]]))

    def _odd_moment(self, v: float, lo: float, hi: float) -> float:
        """int_{lo <= |z| < hi} z kappa(v, z) J(z) dz."""
        return float(self.symbol.coeffs._odd_integral(v, lo, hi))

    def _outer_mass(self, kz, r: float, bps) -> float:
        """int_{|z| >= r} kappa(v, z) J(z) dz (both sides, to infinity)."""
        total = 0.0
        for sgn in (1.0, -1.0):
            g = lambda y: float(kz(sgn * math.exp(y))) * math.exp(y)  # noqa: E731
            for lo, hi in _log_pieces(r, np.inf, bps):
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", integrate.IntegrationWarning)
                    total += integrate.quad(g, lo, hi, epsabs=1e-14, epsrel=1e-11, limit=200)[0]
        # the kernel beyond |z| = H is not tabulated; its contribution int g(u-z) K dz <= sup_{|z|>H} K
        return total


class _KernelSplines:
    def __init__(self, u: np.ndarray, vals: list, half_width: float):
        self.u = u
        self.half_width = half_width
        self._s = [CubicHermiteSpline(u, vals[k], vals[k + 1]) for k in range(3)]

    def __call__(self, order: int, u):
        u = np.asarray(u, dtype=float)
        inside = np.abs(u) <= self.half_width
        out = self._s[order](np.clip(u, -self.half_width, self.half_width))
        return np.where(inside, out, 0.0)


def frozen_density(ev: FrozenKernelEvaluator, t: float, x, y) -> np.ndarray:
    return ev.density(t, x, y)


def frozen_density_derivative(ev: FrozenKernelEvaluator, t: float, x, y, order: int) -> np.ndarray:
    return ev.derivative(t, x, y, order)


def delta_increment(ev: FrozenKernelEvaluator, r: float, t: float, x: float, y: float, z: float) -> float:
    """p(t, x+z, y) - p(t, x, y) - 1_{|z|<r} z d/dx p(t, x, y)."""
    vals = ev.evaluate(t, np.array([y - x - z, y - x])).raw
    out = vals[0] - vals[1]
    if abs(z) < r:
        out -= z * ev.evaluate(t, np.array([y - x]), 1).raw[0]
    return float(out)


def apply_frozen_generator(ev: FrozenKernelEvaluator, v: float, t: float, x, y,
                           r: Optional[float] = None) -> np.ndarray:
    return ev.apply_generator(v, t, x, y, r)
