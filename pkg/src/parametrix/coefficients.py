"""Operator data (b, kappa, J), the effective drift and assumption checks.

Coefficient-dependent modules work in dimension one.  Jump kernels of the
product form kappa(x, z) = a(x) k(z) with drift b(x) = b0 a(x) get a fast
path: every frozen symbol is then a(w) times one fixed symbol.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import AssumptionViolation, DomainError, QuadratureError
from .profiles import LevyProfile, QuadConfig, log_profile, oscillating_profile, power_profile
from .reports import VerificationReport


@dataclass(frozen=True, eq=False)
class ProductForm:
    """kappa(x, z) = a(x) k(z) and b(x) = b0 a(x)."""

    a: Callable
    k: Callable
    k_breakpoints: tuple = (0.0,)
    b0: float = 0.0
    # piecewise-constant k: values on z < 0 and z >= 0 (enables closed-form symbols)
    k_sides: Optional[tuple] = None


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    """Coefficients of the Levy-type operator in dimension one."""

    b: Callable
    kappa: Callable
    J: Callable
    profile: LevyProfile
    c_J: float = 1.0
    c_kappa: float = 1.0
    eps_kappa: float = 1.0
    product: Optional[ProductForm] = None
    z_breakpoints: tuple = (0.0,)
    name: str = "custom"
    quad_cfg: QuadConfig = field(default_factory=lambda: QuadConfig(epsabs=1e-12, epsrel=1e-9, limit=400))
    notes: str = ""

    def __post_init__(self):
        if self.profile.dimension != 1:
            raise DomainError("coefficient sets are implemented for d = 1")
        if self.c_J < 1 or self.c_kappa < 1 or not 0 < self.eps_kappa <= 1:
            raise DomainError("need c_J >= 1, c_kappa >= 1 and eps_kappa in (0, 1]")
        object.__setattr__(self, "_compensator", lru_cache(maxsize=4096)(self._compensator_uncached))

    def jump_density(self, x: float, z):
        """kappa(x, z) J(z)."""
        z = np.asarray(z, dtype=float)
        return self.kappa(x, z) * self.J(z)

    # effective drift -------------------------------------------------------
    def _odd_integral(self, x: float, lo: float, hi: float) -> float:
        """int_{lo <= |z| < hi} z kappa(x, z) J(z) dz for 0 < lo < hi."""
        def f(z):
            return z * (self.kappa(x, z) * self.J(z) - self.kappa(x, -z) * self.J(-z))

        cuts = np.log(sorted({lo, hi, *[abs(p) for p in self.z_breakpoints if lo < abs(p) < hi]}))
        edges = [cuts[0]]
        for a, b in zip(cuts[:-1], cuts[1:]):
            n = max(1, int(math.ceil((b - a) / math.log(10.0))))
            edges.extend(np.linspace(a, b, n + 1)[1:])
        g = lambda y: f(math.exp(y)) * math.exp(y)  # noqa: E731
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                val, err = integrate.quad(g, a, b, epsabs=self.quad_cfg.epsabs,
                                          epsrel=self.quad_cfg.epsrel, limit=self.quad_cfg.limit)
            if not np.isfinite(val) or err > 1e3 * max(self.quad_cfg.epsabs, self.quad_cfg.epsrel * abs(val)):
                raise QuadratureError("effective drift integral did not converge", total + val, err)
            total += val
        return total

    def _compensator_uncached(self, r: float) -> float:
        """Product form: int z (1_{|z|<r} - 1_{|z|<1}) k(z) J(z) dz."""
        pf = self.product
        inner = CoefficientSet(b=self.b, kappa=lambda x, z: pf.k(z), J=self.J, profile=self.profile,
                               z_breakpoints=self.z_breakpoints, quad_cfg=self.quad_cfg)
        if r < 1:
            return -inner._odd_integral(0.0, r, 1.0)
        if r > 1:
            return inner._odd_integral(0.0, 1.0, r)
        return 0.0

    def effective_drift(self, x, r: float):
        """b_r^x = b(x) + int z (1_{|z|<r} - 1_{|z|<1}) kappa(x, z) J(z) dz."""
        if not r > 0:
            raise DomainError("effective drift needs r > 0")
        if self.product is not None:
            comp = self._compensator(float(r))
            xa = np.asarray(x, dtype=float)
            out = self.b(xa) + self.product.a(xa) * comp
            return float(out) if np.ndim(out) == 0 else out
        if np.ndim(x) > 0:
            return np.array([self.effective_drift(float(v), r) for v in np.ravel(x)]).reshape(np.shape(x))
        x = float(x)
        if r < 1:
            return float(self.b(x)) - self._odd_integral(x, r, 1.0)
        if r > 1:
            return float(self.b(x)) + self._odd_integral(x, 1.0, r)
        return float(self.b(x))

    def with_name(self, name: str) -> "CoefficientSet":
        return replace(self, name=name)


effective_drift = CoefficientSet.effective_drift


@dataclass(frozen=True)
class DriftParameters:
    sigma: float
    pairs: tuple  # ((eps_j, s_j), ...)
    variant: str = "A_star"  # "A" or "A_star"

    def __post_init__(self):
        if not 0 < self.sigma <= 1:
            raise DomainError("sigma must lie in (0, 1]")
        for e, s in self.pairs:
            if not (0 < e <= 1 and 0 < s <= 1):
                raise DomainError("eps_j and s_j must lie in (0, 1]")
        if self.variant not in ("A", "A_star"):
            raise DomainError("variant must be 'A' or 'A_star'")

    def all_pairs(self, eps_kappa: float) -> list:
        """Pairs with the j = 0 convention (eps_kappa, 1) prepended."""
        return [(eps_kappa, 1.0), *self.pairs]

    def violations(self, alpha_h: float) -> list:
        msgs = []
        for j, (e, s) in enumerate(self.pairs, start=1):
            if min(alpha_h, self.sigma * e) + s - 1 <= 0:
                msgs.append(f"pair {j}: alpha_h ^ (sigma eps_j) + s_j - 1 <= 0")
        if self.variant == "A" and alpha_h + self.sigma - 1 <= 0:
            msgs.append("alpha_h + sigma - 1 <= 0")
        return msgs


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    hi_closed: bool = False

    def contains(self, x: float) -> bool:
        return self.lo < x < self.hi or (self.hi_closed and x == self.hi)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


def epsilon0_window(params: DriftParameters, alpha_h: float, eps_kappa: float) -> Interval:
    """Admissible range for the series exponent eps0."""
    terms = [min(alpha_h, params.sigma * e) + s - 1.0 for e, s in params.all_pairs(eps_kappa)]
    hi = min(terms)
    closed = False
    if params.variant == "A":
        cap = alpha_h + params.sigma - 1.0
        if cap <= hi:
            hi, closed = cap, True
    if hi <= 0:
        raise AssumptionViolation(f"empty eps0 window (upper end {hi:.6g})")
    return Interval(0.0, hi, closed)


def eta_exponent(params: DriftParameters, alpha_h: float, eps_kappa: float) -> float:
    """2 min_j {alpha_h/2 ^ (sigma eps_j) + s_j - 1}, j = 0..N."""
    return 2.0 * min(min(alpha_h / 2.0, params.sigma * e) + s - 1.0 for e, s in params.all_pairs(eps_kappa))


# ---------------------------------------------------------------------------
# sampled checks


def default_r_grid(n: int = 64, r_min: float = 1e-4) -> np.ndarray:
    return np.geomspace(r_min, 1.0, n)


def default_x_grid(lo: float = -1.0, hi: float = 2.0, n: int = 64) -> np.ndarray:
    """Mixed grid: half linear over [lo, hi], half clustered near lo and hi."""
    lin = np.linspace(lo, hi, n // 2)
    span = hi - lo
    off = np.geomspace(1e-4 * span, 0.5 * span, n - n // 2 - (n - n // 2) // 2)
    near = np.concatenate([lo + off, hi - off[: (n - n // 2) // 2]])
    return np.unique(np.concatenate([lin, near]))


def check_structure(coeffs: CoefficientSet, x_grid=None, z_grid=None) -> list:
    """Sampled bounds on J against nu and on kappa (boundedness and Holder)."""
    x_grid = default_x_grid() if x_grid is None else np.asarray(x_grid)
    z_grid = np.concatenate([-np.geomspace(1e-4, 1e2, 40), np.geomspace(1e-4, 1e2, 40)]) if z_grid is None else np.asarray(z_grid)
    nu = np.array([coeffs.profile.nu(abs(z)) for z in z_grid])
    jv = coeffs.J(z_grid)
    rep_j = VerificationReport("J_comparable")
    ratio = np.maximum(jv / nu, nu / np.maximum(jv, 1e-300))
    for z, r in zip(z_grid, ratio):
        rep_j.add({"z": float(z)}, r, coeffs.c_J)
    rep_j.passed = rep_j.max_ratio <= 1.0 + 1e-12
    rep_b = VerificationReport("kappa_bounds")
    rep_h = VerificationReport("kappa_holder")
    kv = np.array([coeffs.kappa(x, z_grid) for x in x_grid])
    worst = np.maximum(kv, 1.0 / np.maximum(kv, 1e-300)).max(axis=1)
    for x, w in zip(x_grid, worst):
        rep_b.add({"x": float(x)}, w, coeffs.c_kappa)
    rep_b.passed = rep_b.max_ratio <= 1.0 + 1e-12
    for i in range(len(x_grid)):
        for j in range(i + 1, len(x_grid)):
            dx = abs(x_grid[j] - x_grid[i])
            diff = np.max(np.abs(kv[i] - kv[j]))
            rep_h.add({"x": float(x_grid[i]), "y": float(x_grid[j])}, diff, coeffs.c_kappa * dx ** coeffs.eps_kappa)
    rep_h.passed = rep_h.max_ratio <= 1.0 + 1e-12
    return [rep_j, rep_b, rep_h]


def check_cancellation_scale(coeffs: CoefficientSet, params: DriftParameters, x_grid=None, r_grid=None,
                             budget: Optional[float] = None, refine_decades: float = 4.0,
                             growth_tol: float = 0.05) -> VerificationReport:
    """Fit the smallest c with |b_r^x| <= c r^sigma h(r) on the grid.

    Passes when the constant is within budget (default c_kappa) and does not
    grow when the grid is extended by refine_decades toward r = 0.
    """
    x_grid = default_x_grid() if x_grid is None else np.asarray(x_grid)
    r_grid = default_r_grid() if r_grid is None else np.asarray(r_grid)
    budget = coeffs.c_kappa if budget is None else budget
    rep = VerificationReport("cancellation_scale")
    h = coeffs.profile.h(r_grid)
    for r, hr in zip(r_grid, h):
        bx = np.abs(coeffs.effective_drift(x_grid, float(r)))
        rhs = r ** params.sigma * hr
        i = int(np.argmax(bx))
        rep.add({"x": float(x_grid[i]), "r": float(r)}, bx[i], rhs)
    c = rep.max_ratio
    ext = np.geomspace(r_grid.min() * 10 ** (-refine_decades), r_grid.min(), 17)
    c_ext = c
    for r in ext:
        bx = np.max(np.abs(coeffs.effective_drift(x_grid, float(r))))
        c_ext = max(c_ext, bx / max(r ** params.sigma * coeffs.profile.h(r), 1e-300))
    growth = c_ext / c - 1.0 if c > 0 else 0.0
    rep.fitted.update(c=c, c_refined=c_ext, growth=growth)
    rep.tolerances.update(budget=budget, growth_tol=growth_tol)
    rep.passed = c <= budget and growth <= growth_tol
    if growth > growth_tol:
        rep.notes.append("fitted constant grows as the r-grid is refined toward 0")
    if c > budget:
        rep.notes.append("fitted constant exceeds budget")
    return rep


def check_holder_drift(coeffs: CoefficientSet, params: DriftParameters, pair_grid=None, r_grid=None,
                       budget: Optional[float] = None, max_sep: Optional[float] = None) -> VerificationReport:
    """Fit c with |b_r^x - b_r^y| <= c sum_j (|x-y|^eps_j [^1]) r^s_j h(r)."""
    r_grid = default_r_grid() if r_grid is None else np.asarray(r_grid)
    if pair_grid is None:
        xs = default_x_grid(n=24)
        pair_grid = [(x, y) for i, x in enumerate(xs) for y in xs[i + 1:]]
    budget = coeffs.c_kappa if budget is None else budget
    if max_sep is None and params.variant == "A":
        max_sep = 1.0
    pairs = [(float(x), float(y)) for x, y in pair_grid if max_sep is None or abs(x - y) <= max_sep]
    rep = VerificationReport("holder_drift")
    if not params.pairs:
        rep.notes.append("no drift pairs declared")
    xs = np.array([p[0] for p in pairs])
    ys = np.array([p[1] for p in pairs])
    dist = np.abs(xs - ys)
    for r in r_grid:
        hr = coeffs.profile.h(float(r))
        diff = np.abs(coeffs.effective_drift(xs, float(r)) - coeffs.effective_drift(ys, float(r)))
        rhs = np.zeros_like(dist)
        for e, s in params.pairs:
            part = dist ** e if params.variant == "A" else np.minimum(dist ** e, 1.0)
            rhs = rhs + part * r ** s * hr
        ratio = diff / np.maximum(rhs, 1e-300)
        i = int(np.argmax(ratio))
        rep.add({"x": xs[i], "y": ys[i], "r": float(r)}, diff[i], rhs[i])
    rep.fitted["c"] = rep.max_ratio
    rep.tolerances["budget"] = budget
    rep.passed = rep.max_ratio <= budget
    return rep


def check_assumptions(coeffs: CoefficientSet, params: DriftParameters, alpha_h: float, C_h: Optional[float] = None,
                      x_grid=None, r_grid=None, budget: Optional[float] = None) -> list:
    """Full assumption bundle: scaling, structure, drift conditions, eps0 window."""
    from .profiles import scaling_certificate

    reps = []
    cert = scaling_certificate(coeffs.profile, alpha_h, C_h)
    rep = VerificationReport("weak_scaling")
    rep.fitted.update(alpha_h=alpha_h, C_h=cert.C_h, max_violation=cert.max_violation)
    rep.passed = cert.passed
    reps.append(rep)
    reps.extend(check_structure(coeffs, x_grid))
    reps.append(check_cancellation_scale(coeffs, params, x_grid, r_grid, budget))
    reps.append(check_holder_drift(coeffs, params, None, r_grid, budget))
    rep = VerificationReport("eps0_window")
    msgs = params.violations(alpha_h)
    try:
        win = epsilon0_window(params, alpha_h, coeffs.eps_kappa)
        rep.fitted.update(lo=win.lo, hi=win.hi, auto=win.midpoint)
        rep.passed = not msgs
    except AssumptionViolation as exc:
        rep.passed = False
        msgs.append(str(exc))
    rep.notes.extend(msgs)
    reps.append(rep)
    return reps


def drift_extension_constants(coeffs: CoefficientSet, t: float, radii: Sequence[float] = (1.0, 2.0, 5.0),
                              n: int = 24, center: float = 0.5) -> dict:
    """Fitted c_R in t |b^x_{r_t} - b^y_{r_t}| <= c_R r_t for |x - y| <= R."""
    rt = coeffs.profile.r_t(t)
    out = {}
    for R in radii:
        xs = np.linspace(center - R / 2, center + R / 2, n)
        b = coeffs.effective_drift(xs, rt)
        out[float(R)] = float(t * np.max(np.abs(b[:, None] - b[None, :])) / rt)
    return out


def efdrf_constant(coeffs: CoefficientSet, params: DriftParameters, T: float, w_grid=None, n: int = 24) -> float:
    """Fitted c in u |b^w_{r_u}| <= c r_t^sigma over 0 < u <= t <= T."""
    w_grid = default_x_grid(n=16) if w_grid is None else np.asarray(w_grid)
    ts = np.geomspace(T * 1e-4, T, n)
    worst = 0.0
    for i, t in enumerate(ts):
        rt = coeffs.profile.r_t(t)
        for u in ts[: i + 1]:
            b = np.max(np.abs(coeffs.effective_drift(w_grid, coeffs.profile.r_t(u))))
            worst = max(worst, u * b / rt ** params.sigma)
    return worst


# ---------------------------------------------------------------------------
# catalog


def ex1_a(x):
    """a(x) = 1 + sqrt(x) on (0, 1), 2 on [1, inf), and 1 for x <= 0."""
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 1.0, 2.0, 1.0 + np.sqrt(np.clip(x, 0.0, 1.0)))
    return float(out) if out.ndim == 0 else out


def ex1_k(z):
    z = np.asarray(z, dtype=float)
    out = np.where(z < 0, 0.5, 1.5)
    return float(out) if out.ndim == 0 else out


def _product(profile: LevyProfile, a, k, *, b0: float = 0.0, k_sides=None, k_breakpoints=(0.0,),
             c_kappa: float, eps_kappa: float, name: str, notes: str = "") -> CoefficientSet:
    pf = ProductForm(a=a, k=k, k_breakpoints=tuple(k_breakpoints), b0=b0, k_sides=k_sides)
    nu = profile.nu
    vec = np.vectorize(lambda z: nu(abs(z)) if z != 0 else math.inf, otypes=[float])

    def J(z):
        if isinstance(z, float):
            return float(nu(abs(z))) if z != 0 else math.inf
        return vec(z)
    return CoefficientSet(
        b=lambda x: b0 * np.asarray(a(x)),
        kappa=lambda x, z: a(x) * k(z),
        J=J,
        profile=profile,
        c_J=1.0,
        c_kappa=c_kappa,
        eps_kappa=eps_kappa,
        product=pf,
        z_breakpoints=tuple(sorted({0.0, 1.0, -1.0, *k_breakpoints})),
        name=name,
        notes=notes,
    )


def _kprod_k(z):
    z = np.asarray(z, dtype=float)
    out = 1.0 + 0.5 * np.where(z > 0, np.sqrt(np.minimum(np.abs(z), 1.0)), 0.0)
    return float(out) if out.ndim == 0 else out


CATALOG_NAMES = ("ex1", "cauchy-const", "ex3", "ex1_log", "ex0_log", "oscillating-1", "oscillating-2", "kappa-prod")


def example_catalog(name: str, sigma: Optional[float] = None, s: Optional[float] = None,
                    b_const: float = 0.0) -> tuple:
    """Return (CoefficientSet, DriftParameters, alpha_h) for a catalog entry.

    sigma and s override the drift exponents where the entry allows a choice.
    """
    if name == "ex1":
        sg = 0.9 if sigma is None else sigma
        ss = 0.9 if s is None else s
        coeffs = _product(power_profile(1.0), ex1_a, ex1_k, k_sides=(0.5, 1.5), c_kappa=3.0, eps_kappa=0.5,
                          name="ex1", notes="a(x) = 1 for x <= 0 (reading adopted for negative x)")
        return coeffs, DriftParameters(sg, ((0.5, ss),), "A_star"), 1.0
    if name == "cauchy-const":
        one = lambda x: np.ones_like(np.asarray(x, dtype=float)) if np.ndim(x) else 1.0  # noqa: E731
        coeffs = _product(power_profile(1.0), one, one, b0=b_const, k_sides=(1.0, 1.0), c_kappa=1.0,
                          eps_kappa=1.0, name="cauchy-const")
        sg = 1.0 if sigma is None else sigma
        ss = 1.0 if s is None else s
        return coeffs, DriftParameters(sg, ((1.0, ss),), "A"), 1.0
    if name in ("ex3", "ex1_log", "ex0_log", "oscillating-1", "oscillating-2"):
        if name == "ex3":
            prof = log_profile("log_decay", 0.5)
            alpha_h = 0.8
        elif name == "ex1_log":
            prof, alpha_h = log_profile("log_inv"), 0.8
        elif name == "ex0_log":
            prof, alpha_h = log_profile("log_grow"), 1.0
        else:
            prof, alpha_h = oscillating_profile(2 if name.endswith("1") else 3), 0.75
        b0 = 0.0
        if name == "ex3":
            # b(x) = int_{|z|<1} z kappa(x, z) J(z) dz = a(x) * b0
            # substitute u = log(2 + 1/z): int_0^1 phi(z) dz / z = int_{log 3}^inf u^{-3/2} e^u / (e^u - 2) du
            tail = integrate.quad(lambda u: 2.0 * u ** -1.5 * math.exp(-u) / (1.0 - 2.0 * math.exp(-u)),
                                  math.log(3.0), np.inf, limit=400)[0]
            b0 = (1.5 - 0.5) * (2.0 / math.sqrt(math.log(3.0)) + tail)
        coeffs = _product(prof, ex1_a, ex1_k, b0=b0, k_sides=(0.5, 1.5), c_kappa=3.0, eps_kappa=0.5, name=name,
                          notes="jump coefficient a(x) k(z) borrowed from ex1")
        # sigma = s_1 = alpha_h (alpha_h < 1), except ex0_log where alpha_h = 1 allows ex1's choice
        sg = (0.9 if alpha_h >= 1 else alpha_h) if sigma is None else sigma
        ss = (0.9 if alpha_h >= 1 else alpha_h) if s is None else s
        return coeffs, DriftParameters(sg, ((0.5, ss),), "A_star"), alpha_h
    if name == "kappa-prod":
        coeffs = _product(power_profile(1.0), ex1_a, _kprod_k, k_breakpoints=(0.0, 1.0), c_kappa=3.0,
                          eps_kappa=0.5, name=name, notes="Holder a (beta = 1/2) and k Holder at 0")
        return coeffs, DriftParameters(1.0, ((0.5, 1.0),), "A_star"), 1.0
    raise KeyError(f"unknown catalog entry {name!r}; known: {', '.join(CATALOG_NAMES)}")
