"""Standard 1-stable law S(1, beta, 1, 0) in the S1 parameterization.

Characteristic function exp(-|xi| (1 + i beta (2/pi) sign(xi) log|xi|)).
Density, distribution function, survival function, density derivative and
the partial first moment are computed from the Zolotarev integral form
after the substitution w = log(E V(theta)), which turns every integrand into
a Gumbel-type weight on a fixed window.  Values are tabulated once per beta
on a sinh-spaced grid and interpolated with cubic Hermite splines.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

_HALF_PI = 0.5 * np.pi
_W_LO, _W_HI = -40.0, 4.0
_V_MAX = 1e6


def _gauss(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def _w_nodes(beta: float) -> int:
    """Gauss nodes per panel; d theta / d ell sharpens as |beta| approaches 1."""
    return int(min(192, np.ceil(12 * max(1.0, 0.5 / (1.0 - abs(beta))))))


@lru_cache(maxsize=8)
def _w_rule(n: int = 12) -> tuple[np.ndarray, np.ndarray]:
    edges = np.arange(_W_LO, _W_HI + 1.0, 2.0)
    parts = [_gauss(a, b, n) for a, b in zip(edges[:-1], edges[1:])]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


class _UniformHermite:
    """Cubic Hermite interpolant on a uniform grid (clamped to the grid)."""

    def __init__(self, x: np.ndarray, f: np.ndarray, df: np.ndarray):
        self.x0 = float(x[0])
        self.h = float(x[1] - x[0])
        self.n = len(x) - 1
        h = self.h
        d = np.diff(f)
        m0, m1 = df[:-1] * h, df[1:] * h
        # coefficients in the local variable s in [0, 1]
        self.c = np.stack([f[:-1], m0, 3 * d - 2 * m0 - m1, -2 * d + m0 + m1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        r = (x - self.x0) / self.h
        i = np.clip(np.floor(r).astype(np.intp), 0, self.n - 1)
        s = r - i
        c = self.c
        return c[0, i] + s * (c[1, i] + s * (c[2, i] + s * c[3, i]))


class _ThetaMap:
    """Inverse of L(theta) = log V(theta) parameterized by theta = (pi/2) tanh(u)."""

    def __init__(self, beta: float):
        self.beta = beta
        self.u_tab = np.linspace(-16.0, 16.0, 64001)
        self.l_tab = self._log_v(self.u_tab)
        ok = np.isfinite(self.l_tab)
        self.u_tab, self.l_tab = self.u_tab[ok], self.l_tab[ok]
        if np.any(np.diff(self.l_tab) <= 0):
            raise RuntimeError("log V is not monotone on the tabulation grid")

    def _parts(self, u):
        b = self.beta
        th = _HALF_PI * np.tanh(u)
        # cos(theta) and pi/2 + b*theta evaluated without cancellation near the ends
        with np.errstate(over="ignore"):
            cos_th = np.sin(np.pi / (1.0 + np.exp(2.0 * np.abs(u))))
            left = np.pi / (1.0 + np.exp(-2.0 * u))  # theta + pi/2
        a = np.where(u < 0, (1.0 - b) * _HALF_PI + b * left, _HALF_PI + b * th)
        return th, cos_th, a

    def _log_v(self, u):
        b = self.beta
        th, cos_th, a = self._parts(u)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(2.0 / np.pi) + np.log(a) - np.log(cos_th) + a * (np.sin(th) / cos_th) / b

    def _dlog_v_dtheta(self, u):
        b = self.beta
        th, cos_th, a = self._parts(u)
        tan_th = np.sin(th) / cos_th
        return b / a + 2.0 * tan_th + a / (b * cos_th ** 2)

    def solve(self, ell: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (u, dtheta/dell) with L(theta(u)) = ell."""
        u = np.interp(ell, self.l_tab, self.u_tab)
        for _ in range(3):
            th_u = _HALF_PI / np.cosh(u) ** 2
            dl = self._dlog_v_dtheta(u) * th_u
            u = u - (self._log_v(u) - ell) / dl
        dth = 1.0 / self._dlog_v_dtheta(u)
        return u, dth


def _direct(beta: float, v: np.ndarray) -> dict[str, np.ndarray]:
    """Quadrature values for beta in (0, 1] at points v (no tabulation)."""
    tmap = _ThetaMap(beta)
    wn, ww = _w_rule(_w_nodes(beta))
    ell0 = _HALF_PI * v / beta
    ell = ell0[:, None] + wn[None, :]
    _, dth = tmap.solve(ell)
    ew = np.exp(wn)
    gumbel = np.exp(wn - ew)
    pdf = (gumbel * dth) @ ww / (2.0 * beta)
    dpdf = -(np.pi / (4.0 * beta ** 2)) * ((gumbel * (1.0 - ew)) * dth) @ ww
    u_lo, _ = tmap.solve(ell0 + _W_LO)
    u_hi, _ = tmap.solve(ell0 + _W_HI)
    th_left = np.pi / (1.0 + np.exp(-2.0 * u_lo))  # theta(ell0 - 40) + pi/2
    th_right = np.pi / (1.0 + np.exp(2.0 * u_hi))  # pi/2 - theta(ell0 + 4)
    cdf = (th_left + (np.exp(-ew) * dth) @ ww) / np.pi
    sf = (th_right + (-np.expm1(-ew) * dth) @ ww) / np.pi
    return {"pdf": pdf, "dpdf": dpdf, "cdf": cdf, "sf": sf}


class Stable1Standard:
    """Tabulated standard 1-stable law with skewness beta in (-1, 1)."""

    def __init__(self, beta: float):
        # |beta| = 1 needs a one-sided jump kernel, which bounded-below kappa excludes
        if not -1.0 < beta < 1.0:
            raise ValueError("beta must lie in (-1, 1)")
        self.beta = float(beta)
        self._ab = abs(self.beta)
        if self._ab > 0:
            self._build()

    def _build(self):
        b = self._ab
        y = np.linspace(-np.arcsinh(_V_MAX), np.arcsinh(_V_MAX), 6001)
        v = np.sinh(y)
        parts = [_direct(b, chunk) for chunk in np.array_split(v, max(1, v.size * _w_nodes(b) // 24000))]
        vals = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
        dv = np.cosh(y)
        self._y_lim = y[-1]
        self._pdf = _UniformHermite(y, vals["pdf"], vals["dpdf"] * dv)
        self._cdf = _UniformHermite(y, vals["cdf"], vals["pdf"] * dv)
        self._sf = _UniformHermite(y, vals["sf"], -vals["pdf"] * dv)
        # d2 pdf is not available; differentiate the pdf spline once for the dpdf slope
        dpdf_slope = np.gradient(vals["dpdf"], y)
        self._dpdf = _UniformHermite(y, vals["dpdf"], dpdf_slope)
        # partial first moment G1(v) = int_0^v w f(w) dw, integrated panelwise in y
        integrand = vals["pdf"] * v * dv
        xg, wg = np.polynomial.legendre.leggauss(4)
        ym = 0.5 * (y[1:] + y[:-1])
        hy = 0.5 * (y[1:] - y[:-1])
        yy = ym[:, None] + hy[:, None] * xg[None, :]
        vv = np.sinh(yy)
        fv = self._pdf(yy)
        panel = (fv * vv * np.cosh(yy)) @ wg * hy
        g1 = np.concatenate([[0.0], np.cumsum(panel)])
        g1 -= np.interp(0.0, y, g1)
        self._g1 = _UniformHermite(y, g1, integrand)
        self._tail_r = (1.0 + b) / np.pi
        self._tail_l = (1.0 - b) / np.pi
        self._g1_r = float(g1[-1])
        self._g1_l = float(g1[0])

    # values for beta >= 0; negative beta handled by reflection in the public methods
    def _eval(self, kind: str, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        y = np.arcsinh(v)
        inside = np.abs(y) <= self._y_lim
        yc = np.clip(y, -self._y_lim, self._y_lim)
        out = getattr(self, "_" + kind)(yc)
        if np.all(inside):
            return out
        big = ~inside
        vb = v[big]
        c = np.where(vb > 0, self._tail_r, self._tail_l)
        av = np.abs(vb)
        if kind == "pdf":
            tail = c / av ** 2
        elif kind == "dpdf":
            tail = -2.0 * c * np.sign(vb) / av ** 3
        elif kind == "cdf":
            tail = np.where(vb > 0, 1.0 - self._tail_r / av, self._tail_l / av)
        elif kind == "sf":
            tail = np.where(vb > 0, self._tail_r / av, 1.0 - self._tail_l / av)
        else:  # g1
            base = np.where(vb > 0, self._g1_r, self._g1_l)
            tail = base + c * np.log(av / _V_MAX)
        out = np.array(out, copy=True)
        out[big] = tail
        return out

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        if self._ab == 0:
            return 1.0 / (np.pi * (1.0 + v * v))
        return self._eval("pdf", v if self.beta > 0 else -v)

    def dpdf(self, v):
        v = np.asarray(v, dtype=float)
        if self._ab == 0:
            return -2.0 * v / (np.pi * (1.0 + v * v) ** 2)
        return self._eval("dpdf", v) if self.beta > 0 else -self._eval("dpdf", -v)

    def cdf(self, v):
        v = np.asarray(v, dtype=float)
        if self._ab == 0:
            return np.where(v < 0, np.arctan2(1.0, -v) / np.pi, 1.0 - np.arctan2(1.0, v) / np.pi)
        return self._eval("cdf", v) if self.beta > 0 else self._eval("sf", -v)

    def sf(self, v):
        v = np.asarray(v, dtype=float)
        if self._ab == 0:
            return np.where(v > 0, np.arctan2(1.0, v) / np.pi, 1.0 - np.arctan2(1.0, -v) / np.pi)
        return self._eval("sf", v) if self.beta > 0 else self._eval("cdf", -v)

    def mass(self, lo, hi):
        """P(lo < Z < hi) without cancellation in either tail."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        right = self.sf(lo) - self.sf(hi)
        left = self.cdf(hi) - self.cdf(lo)
        return np.where(lo > 0, right, np.where(hi < 0, left, 1.0 - self.cdf(lo) - self.sf(hi)))

    def g1(self, v):
        """Partial first moment int_0^v w f(w) dw."""
        v = np.asarray(v, dtype=float)
        if self._ab == 0:
            return np.log1p(v * v) / (2.0 * np.pi)
        return self._eval("g1", v) if self.beta > 0 else self._eval("g1", -v)


@lru_cache(maxsize=16)
def standard(beta: float) -> Stable1Standard:
    return Stable1Standard(beta)
