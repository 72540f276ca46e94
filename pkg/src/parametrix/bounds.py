"""Upper-bound envelopes built from the bound function and fitted constants."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .coefficients import CoefficientSet, DriftParameters
from .errors import AssumptionViolation, DomainError
from .profiles import LevyProfile, upsilon
from .reports import VerificationReport


@dataclass
class EnvelopeSpec:
    """c t (rho~^0_0 + sum_j rho~^{s_j - 1}_{eps_j}) with a drift-shifted argument."""

    drift_anchor: str  # "x" or "y"
    terms: list  # (gamma, beta) pairs; (0, 0) first
    eta: float
    scale: float = 1.0
    eps0: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.drift_anchor not in ("x", "y"):
            raise DomainError("drift_anchor must be 'x' or 'y'")

    def with_scale(self, c: float) -> "EnvelopeSpec":
        return replace(self, scale=float(c))


def eta_value(params: DriftParameters, alpha_h: float, eps_kappa: float) -> float:
    """2 min_j (alpha_h / 2 ^ sigma eps_j + s_j - 1) over j = 0..N."""
    return 2.0 * min(min(0.5 * alpha_h, params.sigma * e) + s - 1.0 for e, s in params.all_pairs(eps_kappa))


def envelope_spec(coeffs: CoefficientSet, params: DriftParameters, alpha_h: float, anchor: str = "y",
                  eps0: Optional[float] = None) -> EnvelopeSpec:
    terms = [(0.0, 0.0)] + [(s - 1.0, e) for e, s in params.all_pairs(coeffs.eps_kappa)]
    return EnvelopeSpec(anchor, terms, eta_value(params, alpha_h, coeffs.eps_kappa), 1.0, eps0,
                        {"coefficients": coeffs.name})


def _shift(coeffs: CoefficientSet, t: float, x, y, anchor: str) -> np.ndarray:
    r_t = float(coeffs.profile.r_t(t))
    w = np.asarray(y if anchor == "y" else x, dtype=float)
    return t * np.asarray(coeffs.effective_drift(w, r_t), dtype=float)


def rho_sum(spec: EnvelopeSpec, coeffs: CoefficientSet, t: float, x, y) -> np.ndarray:
    """sum over the spec terms of r_t^gamma (|y - x|^beta ^ 1) t^-1 Ups_t(y - x - shift)."""
    prof = coeffs.profile
    if not 0.0 < t <= prof.t0 * (1 + 1e-12):
        raise DomainError(f"t={t} outside (0, t0] with t0={prof.t0}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u = y - x
    ups = np.asarray(upsilon(prof, t, u - _shift(coeffs, t, x, y, spec.drift_anchor))) / t
    r_t = float(prof.r_t(t))
    total = np.zeros(np.broadcast(x, y).shape)
    au = np.abs(u)
    for gamma, beta in spec.terms:
        holder = np.minimum(au ** beta, 1.0) if beta > 0 else 1.0
        total = total + r_t ** gamma * holder * ups
    return total


def pointwise_bound(spec: EnvelopeSpec, coeffs: CoefficientSet, t: float, x, y) -> np.ndarray:
    """c t (rho~^0_0 + sum_j rho~^{s_j-1}_{eps_j})(t, x, y)."""
    if spec.eta <= 0:
        raise AssumptionViolation(f"eta = {spec.eta:.4g} <= 0: the pointwise bound does not apply")
    return spec.scale * t * rho_sum(spec, coeffs, t, x, y)


@dataclass
class EnvelopeFit:
    c: float
    argmax: dict
    violations: list
    report: VerificationReport


def fit_envelope(table, spec: EnvelopeSpec, coeffs: CoefficientSet, tol: float = 1e-12) -> EnvelopeFit:
    """c = max of p / bound (with c = 1) over the table, plus the location of the maximum."""
    if table.kind != "p" and not table.kind.startswith("synthetic"):
        raise DomainError("fit_envelope needs a p table")
    unit = spec.with_scale(1.0)
    X, Y = np.meshgrid(table.x_grid, table.y_grid, indexing="ij")
    best, where, bad = -np.inf, {}, []
    for i, t in enumerate(table.t_grid):
        b = pointwise_bound(unit, coeffs, float(t), X, Y)
        p = table.values[i]
        zero = b <= 0
        if np.any(zero & (p > tol)):
            for j, k in np.argwhere(zero & (p > tol))[:10]:
                bad.append({"t": float(t), "x": float(X[j, k]), "y": float(Y[j, k]), "p": float(p[j, k])})
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(zero, -np.inf, p / b)
        j, k = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
        if ratio[j, k] > best:
            best = float(ratio[j, k])
            where = {"t": float(t), "x": float(X[j, k]), "y": float(Y[j, k])}
    rep = VerificationReport("envelope", passed=not bad and math.isfinite(best), kind="envelope")
    rep.fitted.update({"c": best, "eps0": spec.eps0, **{f"argmax_{k}": v for k, v in where.items()}})
    if bad:
        rep.notes.append(f"bound vanishes where p > {tol:g} at {len(bad)} entries")
    return EnvelopeFit(best, where, bad, rep)


def fit_constant(values: np.ndarray, bound: np.ndarray, floor: float = 0.0) -> float:
    """Smallest c with |values| <= c bound + floor."""
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(bound > 0, (np.abs(values) - floor) / bound, np.where(np.abs(values) > floor, np.inf, 0.0))
    return float(np.max(r))


def example_ex1_shape(coeffs: CoefficientSet, t: float, x, y, s: float) -> np.ndarray:
    """(1 + t^{s-1}(|y - x|^{1/2} ^ 1)) (t^-1 ^ t / |y - x - a(y) t log(1 / (t h(1)))|^2)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u = y - x
    a = np.asarray(coeffs.product.a(y), dtype=float)
    h1 = 1.0 / coeffs.profile.t0
    shifted = u - a * t * math.log(1.0 / (t * h1))
    with np.errstate(divide="ignore"):
        tail = np.where(shifted == 0, np.inf, t / shifted ** 2)
    return (1.0 + t ** (s - 1.0) * np.minimum(np.abs(u) ** 0.5, 1.0)) * np.minimum(1.0 / t, tail)


# ---------------------------------------------------------------------------
# convolution and shift checks


def _rho0_integral(profile: LevyProfile, t: float, beta: float) -> float:
    """int (|u|^beta ^ 1) t^-1 Ups_t(u) du in the variable log |u|, one panel per half decade."""
    r_t = float(profile.r_t(t))
    lo, hi = math.log(1e-12 * r_t), math.log(1e12 * max(r_t, 1.0))

    def f(v):
        u = math.exp(v)
        return (min(u ** beta, 1.0) if beta > 0 else 1.0) * float(upsilon(profile, t, u)) / t * u

    edges = np.union1d(np.linspace(lo, hi, int((hi - lo) / (0.5 * math.log(10.0))) + 2), [math.log(r_t), 0.0])
    total = sum(integrate.quad(f, a, b, limit=200, epsabs=0.0, epsrel=1e-12)[0]
                for a, b in zip(edges[:-1], edges[1:]))
    # [0, e^lo]: the integrand is constant in u there
    total += f(lo)
    return 2.0 * total


def check_conv_lemma_a(profile: LevyProfile, coeffs: Optional[CoefficientSet], beta0: float, beta: float,
                       t_grid: Sequence[float], alpha_h: float = 1.0, sigma: float = 1.0) -> VerificationReport:
    """Fit c1 in int rho^0_beta(t, x, z) dz <= (c1 / (alpha_h - beta0)) t^-1 r_t^{beta0 ^ sigma beta}."""
    if not 0.0 <= beta0 < alpha_h:
        raise DomainError("need 0 <= beta0 < alpha_h")
    if not 0.0 <= beta <= 2.0:
        raise DomainError("beta must lie in [0, 2]")
    rep = VerificationReport("conv_lemma_a", kind="bound")
    expo = min(beta0, sigma * beta)
    c1 = 0.0
    for t in t_grid:
        lhs = _rho0_integral(profile, float(t), beta)
        unit = float(profile.r_t(t)) ** expo / (float(t) * (alpha_h - beta0))
        c1 = max(c1, lhs / unit)
        rep.add({"t": float(t)}, lhs, unit)
    rep.fitted.update({"c1": c1, "c1_times_gap": c1 * (alpha_h - beta0), "beta0": beta0, "beta": beta})
    rep.passed = math.isfinite(c1)
    return rep


def check_drift_swap(coeffs: CoefficientSet, t_grid: Sequence[float], x_grid, y_grid,
                     c_max: float = 1e3) -> VerificationReport:
    """Fitted sup of Ups_t(y - x - t b^y_{r_t}) / Ups_t(y - x - t b^x_{r_t})."""
    prof = coeffs.profile
    X, Y = np.meshgrid(np.asarray(x_grid, float), np.asarray(y_grid, float), indexing="ij")
    rep = VerificationReport("drift_swap", kind="bound")
    worst = 0.0
    for t in t_grid:
        r_t = float(prof.r_t(t))
        by = t * np.asarray(coeffs.effective_drift(Y, r_t), float)
        bx = t * np.asarray(coeffs.effective_drift(X, r_t), float)
        ratio = np.asarray(upsilon(prof, t, Y - X - by)) / np.asarray(upsilon(prof, t, Y - X - bx))
        worst = max(worst, float(ratio.max()))
        rep.add({"t": float(t)}, float(ratio.max()), c_max)
    rep.fitted["c"] = worst
    rep.passed = math.isfinite(worst) and worst <= c_max
    return rep


def check_composite_shift(coeffs: CoefficientSet, t_grid: Sequence[float], x_grid, y_grid,
                          s_fracs: Sequence[float] = (0.1, 0.25, 0.5, 0.75, 0.9),
                          c_max: float = 1e3) -> VerificationReport:
    """Fitted sup of Ups_t(y - x - (t - s) b^x_{r_{t-s}} - s b^y_{r_s}) / Ups_t(y - x - t b^y_{r_t})."""
    prof = coeffs.profile
    X, Y = np.meshgrid(np.asarray(x_grid, float), np.asarray(y_grid, float), indexing="ij")
    rep = VerificationReport("composite_shift", kind="bound")
    worst = 0.0
    for t in t_grid:
        r_t = float(prof.r_t(t))
        ref = np.asarray(upsilon(prof, t, Y - X - t * np.asarray(coeffs.effective_drift(Y, r_t), float)))
        for f in s_fracs:
            s = f * t
            sh = ((t - s) * np.asarray(coeffs.effective_drift(X, float(prof.r_t(t - s))), float)
                  + s * np.asarray(coeffs.effective_drift(Y, float(prof.r_t(s))), float))
            ratio = np.asarray(upsilon(prof, t, Y - X - sh)) / ref
            worst = max(worst, float(ratio.max()))
            rep.add({"t": float(t), "s": s}, float(ratio.max()), c_max)
    rep.fitted["c"] = worst
    rep.passed = math.isfinite(worst) and worst <= c_max
    return rep
