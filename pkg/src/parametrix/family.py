"""Closed-form kernel family for 1-stable product-form coefficients.

When nu(r) = c r^{-2} in dimension one, k is constant on each half-line and
b = b0 a, the frozen kernel at y is g(a(y) t, y - x), where g(s, .) is the
density of a 1-stable law with scale sigma1 s, skewness beta and location
mu(s).  Standardizing through the S1 scaling rule gives

    g(s, u) = f((u - mu'(s)) / (sigma1 s)) / (sigma1 s),
    mu'(s)  = m0 s + (2/pi) beta sigma1 s log(sigma1 s),

with f the standard S(1, beta, 1, 0) density.  Cell masses, first moments
and their time integrals over a uniform grid follow from f, its
distribution function and its partial first moment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coefficients import CoefficientSet
from .errors import UnsupportedError
from .quadrature import gauss_panels
from .stable1 import standard


@dataclass(frozen=True)
class Stable1Params:
    sigma1: float
    beta: float
    m0: float


def stable1_params(coeffs: CoefficientSet) -> Stable1Params:
    """Parameters of the unit-time law when Psi_w = a(w) S(xi)."""
    prof, pf = coeffs.profile, coeffs.product
    if pf is None or pf.k_sides is None or prof.power_law is None or prof.power_law[0] != 1.0:
        raise UnsupportedError("the kernel family needs nu = c r^-2 and a product form with "
                               "piecewise-constant k")
    _, scale = prof.power_law
    km, kp = pf.k_sides
    sigma1 = scale * (kp + km) * math.pi / 2.0
    delta = scale * (kp - km)
    beta = (kp - km) / (kp + km)
    return Stable1Params(sigma1, beta, delta * (1.0 - float(np.euler_gamma)) + pf.b0)


class Stable1Family:
    """g(s, u) and its cell integrals; s is the intrinsic time a(y) t."""

    def __init__(self, params: Stable1Params):
        self.params = params
        self.law = standard(round(params.beta, 15))

    @classmethod
    def from_coeffs(cls, coeffs: CoefficientSet) -> "Stable1Family":
        return cls(stable1_params(coeffs))

    # location and scale ---------------------------------------------------
    def sigma(self, s):
        return self.params.sigma1 * np.asarray(s, dtype=float)

    def mu(self, s):
        p = self.params
        s = np.asarray(s, dtype=float)
        return p.m0 * s + (2.0 / np.pi) * p.beta * p.sigma1 * s * np.log(p.sigma1 * s)

    def dmu(self, s):
        p = self.params
        return p.m0 + (2.0 / np.pi) * p.beta * p.sigma1 * (np.log(p.sigma1 * np.asarray(s, dtype=float)) + 1.0)

    def _v(self, s, u):
        s = np.asarray(s, dtype=float)
        sig = self.sigma(s)
        v = (np.asarray(u, dtype=float) - self.mu(s)) / sig
        dv = -self.dmu(s) / sig - v / s
        return v, dv, sig

    # point values ---------------------------------------------------------
    def g(self, s, u):
        v, _, sig = self._v(s, u)
        return self.law.pdf(v) / sig

    def dg_ds(self, s, u):
        v, dv, sig = self._v(s, u)
        s = np.asarray(s, dtype=float)
        return self.law.dpdf(v) * dv / sig - self.law.pdf(v) / (sig * s)

    def dg_du(self, s, u, order: int = 1):
        v, _, sig = self._v(s, u)
        if order == 1:
            return self.law.dpdf(v) / sig ** 2
        raise ValueError("only the first u-derivative is available")

    # cell integrals over [lo, hi] ------------------------------------------
    def mass(self, s, lo, hi):
        vl, _, _ = self._v(s, lo)
        vh, _, _ = self._v(s, hi)
        return self.law.mass(vl, vh)

    def mass_ds(self, s, lo, hi):
        vl, dl, _ = self._v(s, lo)
        vh, dh, _ = self._v(s, hi)
        return self.law.pdf(vh) * dh - self.law.pdf(vl) * dl

    def moment1(self, s, lo, hi):
        """int_lo^hi u g(s, u) du."""
        vl, _, sig = self._v(s, lo)
        vh, _, _ = self._v(s, hi)
        return sig * (self.law.g1(vh) - self.law.g1(vl)) + self.mu(s) * self.law.mass(vl, vh)

    def moment1_ds(self, s, lo, hi):
        vl, dl, sig = self._v(s, lo)
        vh, dh, _ = self._v(s, hi)
        fl, fh = self.law.pdf(vl), self.law.pdf(vh)
        dg1 = self.law.g1(vh) - self.law.g1(vl)
        m = self.law.mass(vl, vh)
        dm = fh * dh - fl * dl
        return (self.params.sigma1 * dg1 + sig * (vh * fh * dh - vl * fl * dl)
                + self.dmu(s) * m + self.mu(s) * dm)


class CellTables:
    """Cell integrals on a uniform grid with spacing delta and their time integrals.

    Offsets m = -K..K label cells [(m - 1/2) delta, (m + 1/2) delta].  Rows hold
    C(s, m) = int_cell g(s, v) dv and N1(s, m) = int_cell (v - m delta) g(s, v) dv
    with their s-derivatives; A = int_0^s C and AN1 = int_0^s N1 are tabulated
    on a log grid in s and interpolated with cubic Hermite polynomials whose
    slopes are the exact integrands.
    """

    def __init__(self, family: Stable1Family, delta: float, kmax: int, s_min: float, s_max: float,
                 per_octave: int = 16, nodes: int = 6):
        self.family = family
        self.delta = float(delta)
        self.kmax = int(kmax)
        self.offsets = np.arange(-self.kmax, self.kmax + 1)
        self.lo = (self.offsets - 0.5) * self.delta
        self.hi = (self.offsets + 0.5) * self.delta
        self.edges = np.append(self.lo, self.hi[-1])
        self.centre = self.offsets * self.delta
        n = max(8, int(math.ceil(per_octave * math.log2(s_max / s_min)))) + 1
        self.s = np.geomspace(s_min, s_max, n)
        self.C = self.mass(self.s)
        self.N1 = self.n1(self.s)
        # cumulative integrals; on [0, s_min] C moves linearly from a unit mass at m = 0 and N1 from 0
        c0 = (self.offsets == 0).astype(float)
        xs, ws = gauss_panels(self.s, nodes)
        w = ws.reshape(n - 1, nodes)
        self.A = self._cumulate(0.5 * s_min * (c0 + self.C[0]), self.mass(xs), w)
        self.AN1 = self._cumulate(0.5 * s_min * self.N1[0], self.n1(xs), w)

    @staticmethod
    def _cumulate(first, vals, w):
        n = w.shape[0] + 1
        out = np.empty((n, first.size))
        out[0] = first
        out[1:] = first + np.cumsum(np.einsum("pn,pnk->pk", w, vals.reshape(n - 1, w.shape[1], -1)), axis=0)
        return out

    # direct closed forms (rows over all offsets); adjacent cells share edges -----
    def _edges(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        v, dv, sig = self.family._v(s[:, None], self.edges[None, :])
        return s, v, dv, sig

    def mass(self, s):
        _, v, _, _ = self._edges(s)
        law = self.family.law
        F, S = law.cdf(v), law.sf(v)
        return np.where(self.lo > 0, S[:, :-1] - S[:, 1:],
                        np.where(self.hi < 0, F[:, 1:] - F[:, :-1], 1.0 - F[:, :-1] - S[:, 1:]))

    def mass_ds(self, s):
        _, v, dv, _ = self._edges(s)
        fd = self.family.law.pdf(v) * dv
        return fd[:, 1:] - fd[:, :-1]

    def n1(self, s):
        s, v, _, sig = self._edges(s)
        dG = np.diff(self.family.law.g1(v), axis=1)
        mu = self.family.mu(s)[:, None]
        return sig * dG + (mu - self.centre[None, :]) * self.mass(s)

    def n1_ds(self, s):
        s, v, dv, sig = self._edges(s)
        law, fam = self.family.law, self.family
        dG = np.diff(law.g1(v), axis=1)
        E = np.diff(v * law.pdf(v) * dv, axis=1)
        mu = fam.mu(s)[:, None]
        return (fam.params.sigma1 * dG + sig * E + fam.dmu(s)[:, None] * self.mass(s)
                + (mu - self.centre[None, :]) * self.mass_ds(s))

    def rows(self, s, need=("C", "C_ds", "N1", "N1_ds")) -> dict:
        """Several row families from one evaluation of the law at the cell edges."""
        s, v, dv, sig = self._edges(s)
        law, fam = self.family.law, self.family
        out = {}
        need = set(need)
        if need & {"C", "N1", "N1_ds"}:
            F, S = law.cdf(v), law.sf(v)
            out["C"] = np.where(self.lo > 0, S[:, :-1] - S[:, 1:],
                                np.where(self.hi < 0, F[:, 1:] - F[:, :-1], 1.0 - F[:, :-1] - S[:, 1:]))
        if need & {"C_ds", "N1_ds"}:
            f = law.pdf(v)
            out["C_ds"] = np.diff(f * dv, axis=1)
        if need & {"N1", "N1_ds"}:
            dG = np.diff(law.g1(v), axis=1)
            off = fam.mu(s)[:, None] - self.centre[None, :]
            if "N1" in need:
                out["N1"] = sig * dG + off * out["C"]
            if "N1_ds" in need:
                out["N1_ds"] = (fam.params.sigma1 * dG + sig * np.diff(v * f * dv, axis=1)
                                + fam.dmu(s)[:, None] * out["C"] + off * out["C_ds"])
        return {k: out[k] for k in need}

    # cell 0 only
    def moment1(self, s):
        return self.n1(s)[:, self.kmax]

    def moment1_ds(self, s):
        return self.n1_ds(s)[:, self.kmax]

    # tabulated time integrals ---------------------------------------------
    def _hermite(self, s, vals, slopes, at_zero):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s > self.s[-1] * (1 + 1e-12)):
            raise ValueError("s beyond the tabulated range")
        out = np.empty((s.size, vals.shape[1]))
        for j, sv in enumerate(s):
            if sv <= self.s[0]:
                # integrand linear between its value at s = 0 and at s_min
                frac = sv / self.s[0]
                out[j] = sv * at_zero + 0.5 * sv * frac * (slopes[0] - at_zero)
                continue
            i = min(int(np.searchsorted(self.s, sv)) - 1, len(self.s) - 2)
            s0, s1 = self.s[i], self.s[i + 1]
            h = s1 - s0
            x = (sv - s0) / h
            h00 = (1 + 2 * x) * (1 - x) ** 2
            h10 = x * (1 - x) ** 2
            h01 = x * x * (3 - 2 * x)
            h11 = x * x * (x - 1)
            out[j] = h00 * vals[i] + h10 * h * slopes[i] + h01 * vals[i + 1] + h11 * h * slopes[i + 1]
        return out

    def A_at(self, s):
        return self._hermite(s, self.A, self.C, (self.offsets == 0).astype(float))

    def AN1_at(self, s):
        return self._hermite(s, self.AN1, self.N1, np.zeros(self.offsets.size))

    def IM1_at(self, s):
        return self.AN1_at(s)[:, self.kmax]


class CellSet:
    """Cell integrals over an arbitrary list of cells [lo_c, hi_c], moments about centre_c.

    Entries are evaluated pairwise: value(s_e, cell_e) for equal-length arrays.
    Time integrals A and AN1 are tabulated as in CellTables.
    """

    def __init__(self, family: Stable1Family, lo, hi, centre, s_min: float, s_max: float,
                 per_octave: int = 16, nodes: int = 6):
        self.family = family
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.centre = np.asarray(centre, dtype=float)
        n = max(8, int(math.ceil(per_octave * math.log2(s_max / s_min)))) + 1
        self.s = np.geomspace(s_min, s_max, n)
        self.inside = ((self.lo < 0) & (self.hi > 0)).astype(float)
        self.C = self._outer(self.s, "C")
        self.N1 = self._outer(self.s, "N1")
        xs, ws = gauss_panels(self.s, nodes)
        w = ws.reshape(n - 1, nodes)
        self.A = CellTables._cumulate(0.5 * s_min * (self.inside + self.C[0]), self._outer(xs, "C"), w)
        self.AN1 = CellTables._cumulate(0.5 * s_min * self.N1[0], self._outer(xs, "N1"), w)

    def _outer(self, s, key, chunk: int = 1 << 20):
        s = np.asarray(s, dtype=float)
        nc = self.lo.size
        out = np.empty((s.size, nc))
        step = max(1, chunk // max(nc, 1))
        for i in range(0, s.size, step):
            sv = s[i: i + step]
            cells = np.tile(np.arange(nc), sv.size)
            out[i: i + step] = self.pairs(np.repeat(sv, nc), cells, (key,))[key].reshape(sv.size, nc)
        return out

    def pairs(self, s, cells, need) -> dict:
        s = np.asarray(s, dtype=float)
        fam, law = self.family, self.family.law
        vl, dl, sig = fam._v(s, self.lo[cells])
        vh, dh, _ = fam._v(s, self.hi[cells])
        need = set(need)
        out = {}
        if need & {"C", "N1", "N1_ds"}:
            out["C"] = law.mass(vl, vh)
        if need & {"C_ds", "N1_ds"}:
            fl, fh = law.pdf(vl), law.pdf(vh)
            out["C_ds"] = fh * dh - fl * dl
        if need & {"N1", "N1_ds"}:
            dG = law.g1(vh) - law.g1(vl)
            off = fam.mu(s) - self.centre[cells]
            if "N1" in need:
                out["N1"] = sig * dG + off * out["C"]
            if "N1_ds" in need:
                out["N1_ds"] = (fam.params.sigma1 * dG + sig * (vh * fh * dh - vl * fl * dl)
                                + fam.dmu(s) * out["C"] + off * out["C_ds"])
        if "A" in need:
            out["A"] = self._hermite(s, cells, self.A, self.C, self.inside)
        if "AN1" in need:
            out["AN1"] = self._hermite(s, cells, self.AN1, self.N1, np.zeros(self.lo.size))
        return {k: out[k] for k in need}

    def _hermite(self, s, cells, vals, slopes, at_zero):
        if np.any(s > self.s[-1] * (1 + 1e-12)):
            raise ValueError("s beyond the tabulated range")
        i = np.clip(np.searchsorted(self.s, s) - 1, 0, len(self.s) - 2)
        s0, s1 = self.s[i], self.s[i + 1]
        h = s1 - s0
        x = (s - s0) / h
        h00 = (1 + 2 * x) * (1 - x) ** 2
        h10 = x * (1 - x) ** 2
        h01 = x * x * (3 - 2 * x)
        h11 = x * x * (x - 1)
        out = (h00 * vals[i, cells] + h10 * h * slopes[i, cells] + h01 * vals[i + 1, cells]
               + h11 * h * slopes[i + 1, cells])
        small = s <= self.s[0]
        if np.any(small):
            # integrand linear between its value at s = 0 and at s_min
            sv, z = s[small], at_zero[cells[small]]
            out[small] = sv * z + 0.5 * sv * (sv / self.s[0]) * (slopes[0, cells[small]] - z)
        return out
