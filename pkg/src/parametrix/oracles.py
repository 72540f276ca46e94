"""Independent reference values and residual checks for kernel tables."""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .coefficients import CoefficientSet
from .engine import KernelTable, compose, mass
from .errors import BudgetError, DomainError
from .family import Stable1Family
from .quadrature import tanh_sinh


@dataclass
class OracleResult:
    name: str
    inputs: dict
    oracle_value: float
    engine_value: float
    abs_err: float
    rel_err: float
    tolerance: dict
    passed: bool = field(init=False)

    def __post_init__(self):
        a = self.tolerance.get("abs", -math.inf)
        r = self.tolerance.get("rel", -math.inf)
        self.passed = bool(self.abs_err <= a or self.rel_err <= r)

    def record(self) -> dict:
        out = asdict(self)
        out["type"] = "oracle"
        return out


def compare(name: str, inputs: dict, oracle: float, engine: float, abs_tol: Optional[float] = None,
            rel_tol: Optional[float] = None) -> OracleResult:
    err = abs(engine - oracle)
    rel = err / abs(oracle) if oracle != 0 else (0.0 if err == 0 else math.inf)
    tol = {}
    if abs_tol is not None:
        tol["abs"] = abs_tol
    if rel_tol is not None:
        tol["rel"] = rel_tol
    return OracleResult(name, inputs, float(oracle), float(engine), float(err), float(rel), tol)


# ---------------------------------------------------------------------------
# closed forms


def cauchy_closed_form(t: float, x, y, kappa0: float = 1.0) -> np.ndarray:
    """gamma / (pi (gamma^2 + (y - x)^2)) with gamma = kappa0 pi t."""
    g = kappa0 * math.pi * t
    u = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    return g / (math.pi * (g * g + u * u))


def cauchy_cdf(t: float, u, kappa0: float = 1.0) -> np.ndarray:
    return 0.5 + np.arctan(np.asarray(u, dtype=float) / (kappa0 * math.pi * t)) / math.pi


# ---------------------------------------------------------------------------
# q0 and q1 references for 1-stable product forms


def _quiet_quad(f, a, b) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(f, a, b, limit=400, epsabs=1e-13, epsrel=1e-9)[0]


def q0_oracle(coeffs: CoefficientSet, t: float, x: float, y: float, r: Optional[float] = None) -> float:
    """Jump form of q0 by adaptive quadrature over z.

    (b_r^x - b_r^y) d_x p + (a(x) - a(y)) int delta_r(z) k(z) J(z) dz, with the
    frozen density taken from the Zolotarev representation; the engine uses the
    closed time-derivative form instead.
    """
    fam = Stable1Family.from_coeffs(coeffs)
    pf = coeffs.product
    r = float(coeffs.profile.r_t(t)) if r is None else r
    s = float(pf.a(y)) * t
    u = y - x
    g0 = float(fam.g(s, u))
    gu = float(fam.dg_du(s, u))

    def delta(z):
        small = z * gu if abs(z) < r else 0.0
        return float(fam.g(s, u - z)) - g0 + small

    def f(z):
        return delta(z) * float(pf.k(z)) * float(coeffs.J(z))

    scale = max(fam.params.sigma1 * s, 1e-12)
    pts = sorted({r, 1.0, abs(u), *[abs(u) + m * scale for m in (-3, 3)], *[b for b in pf.k_breakpoints if b > 0]})
    pts = [p for p in pts if p > 0]
    jump = 0.0
    quad = _quiet_quad
    for sgn in (1.0, -1.0):
        g = (lambda v: f(v)) if sgn > 0 else (lambda v: f(-v))
        edges = [0.0] + pts
        for a, b in zip(edges[:-1], edges[1:]):
            if b > a:
                jump += quad(g, a, b)
        jump += quad(g, edges[-1], np.inf)
    drift = float(coeffs.effective_drift(x, r)) - float(coeffs.effective_drift(y, r))
    return drift * (-gu) + (float(pf.a(x)) - float(pf.a(y))) * jump


def _q0_closed(fam: Stable1Family, a: Callable, t, x, y) -> np.ndarray:
    ay = np.asarray(a(y), dtype=float)
    return (np.asarray(a(x), dtype=float) - ay) * fam.dg_ds(ay * t, np.asarray(y) - np.asarray(x))


def q1_oracle(coeffs: CoefficientSet, t: float, x: float, y: float, level: int = 6, z_level: int = 5) -> float:
    """int_0^t int q0(t - s, x, z) q0(s, z, y) dz ds by nested tanh-sinh quadrature.

    The z-integral is split at points graded toward x and y on the scale of the
    respective kernels and at the kinks of the coefficient.
    """
    fam = Stable1Family.from_coeffs(coeffs)
    a = coeffs.product.a
    sig = fam.params.sigma1 * max(float(np.max(a(np.array([x, y])))), 1.0)
    kinks = [0.0, 1.0]

    def z_integral(s: float) -> float:
        ts = t - s
        pts = {x, y, *kinks}
        for c, w in ((x, sig * ts), (y, sig * s)):
            for m in 10.0 ** np.arange(-3, 5):
                pts.update((c - m * w, c + m * w))
        edges = np.array(sorted(p for p in pts if -60.0 <= p <= 60.0))
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi - lo > 0:
                total += tanh_sinh(lambda z: _q0_closed(fam, a, ts, x, z) * _q0_closed(fam, a, s, z, y), lo, hi,
                                   z_level)
        # tails beyond |z| = 60 through z = +-60 / v
        for sgn in (1.0, -1.0):
            def tail(v, sgn=sgn):
                z = sgn * 60.0 / v
                return _q0_closed(fam, a, ts, x, z) * _q0_closed(fam, a, s, z, y) * 60.0 / v ** 2
            total += tanh_sinh(tail, 0.0, 1.0, z_level)
        return total

    return tanh_sinh(lambda ss: np.array([z_integral(float(v)) for v in ss]), 0.0, t, level)


# ---------------------------------------------------------------------------
# constant-coefficient tables through the Fourier evaluator


def frozen_kernel_table(coeffs: CoefficientSet, t_grid: Sequence[float], x_grid, w: float = 0.0,
                        xi_cutoff: Optional[float] = None) -> KernelTable:
    """p table of the Levy kernel frozen at w (exact p for constant coefficients).

    xi_cutoff truncates the Fourier integral; used for fault injection.
    """
    from .frozen import FrozenKernelEvaluator, FrozenSymbol

    x = np.asarray(x_grid, dtype=float)
    ev = FrozenKernelEvaluator(FrozenSymbol(coeffs, w, cutoff=xi_cutoff))
    vals, errs = [], []
    # only distinct offsets y - x need a Fourier evaluation
    u, inv = np.unique(np.round((x[None, :] - x[:, None]).ravel(), 12), return_inverse=True)
    for t in t_grid:
        res = ev.evaluate(float(t), u)
        vals.append(np.asarray(res.values)[inv].reshape(x.size, x.size))
        err = np.broadcast_to(np.asarray(res.quad_err, dtype=float), u.shape)
        errs.append(err[inv].reshape(x.size, x.size))
    meta = {"coefficients": coeffs.name, "series_depth": 1, "frozen_at": w, "xi_cutoff": xi_cutoff}
    return KernelTable(np.asarray(t_grid, float), x, x, np.stack(vals), "p", np.stack(errs), meta)


# ---------------------------------------------------------------------------
# residual suite


@dataclass
class SuiteTolerances:
    mass: float = 1e-2
    positivity: float = 1e-3
    ck: float = 5e-2
    contraction: float = 1e-2


def default_probes(grid: np.ndarray, n: int = 3) -> list:
    """n grid points spread over the middle half of the grid."""
    lo, hi = grid[0] + 0.25 * (grid[-1] - grid[0]), grid[-1] - 0.25 * (grid[-1] - grid[0])
    targets = np.linspace(lo, hi, n)
    return [float(grid[int(np.argmin(np.abs(grid - v)))]) for v in targets]


def mass_results(table: KernelTable, times, probes, tol: float) -> list:
    out = []
    for t in times:
        for x in probes:
            out.append(compare("mass", {"t": float(t), "x": float(x)}, 1.0, mass(table, float(t), float(x)),
                               abs_tol=tol))
    return out


def positivity_result(table: KernelTable, tol: float) -> OracleResult:
    vmin, vmax = float(table.values.min()), float(table.values.max())
    # oracle value 0: the entry is acceptable when it is above -tol * max
    res = compare("positivity", {"min": vmin, "max": vmax}, 0.0, min(vmin, 0.0), abs_tol=tol * vmax)
    return res


def ck_results(table: KernelTable, s: float, t: float, probes, tol: float) -> list:
    comp = compose(table, s, t)
    P = table.slice(t)
    out = []
    for x in probes:
        for y in probes:
            i, j = table.x_index(x), table.x_index(y)
            out.append(compare("chapman_kolmogorov", {"s": s, "t": t, "x": x, "y": y}, float(P[i, j]),
                               float(comp[i, j]), rel_tol=tol))
    return out


def contraction_results(table: KernelTable, tol: float, fs=None) -> list:
    fs = fs or {"cos3": lambda y: np.cos(3.0 * y), "step": lambda y: (y > 0.5).astype(float)}
    out = []
    interior = slice(table.x_grid.size // 4, 3 * table.x_grid.size // 4)
    for name, f in fs.items():
        fy = f(table.y_grid)
        sup_f = float(np.max(np.abs(fy)))
        for i, t in enumerate(table.t_grid):
            Pf = table.values[i, interior] @ (fy * table.weights())
            excess = max(float(np.max(np.abs(Pf))) - sup_f, 0.0)
            out.append(compare("contraction", {"t": float(t), "f": name}, 0.0, excess, abs_tol=tol))
    return out


def q0_l1_result(result) -> OracleResult:
    """Finite fitted C3 in int |q0(t, x, .)| <= C3 t^-1 r_t^eps0."""
    C3 = result.fitted_C3()
    ok = math.isfinite(C3)
    return compare("q0_l1", {"eps0": result.engine.eps0}, C3, C3 if ok else math.inf, abs_tol=0.0)


def run_residual_suite(table: KernelTable, probes=None, tol: Optional[SuiteTolerances] = None,
                       ck_pairs=None, build=None) -> list:
    """Mass, positivity, Chapman-Kolmogorov, contraction and (given a build) q0 L1 residuals."""
    tol = tol or SuiteTolerances()
    probes = probes if probes is not None else default_probes(table.x_grid)
    out = mass_results(table, table.t_grid, probes, tol.mass)
    out.append(positivity_result(table, tol.positivity))
    if ck_pairs is None:
        ts = [float(v) for v in table.t_grid]
        ck_pairs = [(s, t) for t in ts for s in ts if s < t and any(math.isclose(t - s, v, rel_tol=1e-9) for v in ts)]
        ck_pairs = ck_pairs[:1]
    for s, t in ck_pairs:
        out.extend(ck_results(table, s, t, probes, tol.ck))
    out.extend(contraction_results(table, tol.contraction))
    if build is not None:
        out.append(q0_l1_result(build))
    return out


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass
class MCHistogram:
    edges: np.ndarray
    density: np.ndarray
    stderr: np.ndarray
    n_paths: int
    seed: int
    cutoff: float
    intensity: float
    drift: float
    meta: dict = field(default_factory=dict)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])


class _JumpSampler:
    """Inverse-CDF sampler for |z| >= cutoff on each half-line of kappa(w, z) J(z)."""

    def __init__(self, coeffs: CoefficientSet, w: float, cutoff: float, n: int = 4001):
        self.w = w
        prof = coeffs.profile
        if prof.power_law is not None and coeffs.product is not None and coeffs.product.k_sides is not None:
            alpha, scale = prof.power_law
            km, kp = coeffs.product.k_sides
            a = float(coeffs.product.a(w))
            self.alpha = alpha
            self.side = np.array([a * scale * km, a * scale * kp]) * cutoff ** (-alpha) / alpha
            self.cutoff = cutoff
            self.table = None
            return
        self.alpha = None
        self.cutoff = cutoff
        v = np.linspace(0.0, math.log(1e6), n)  # z = cutoff e^v
        z = cutoff * np.exp(v)
        self.table = []
        self.side = np.empty(2)
        for k, sgn in enumerate((-1.0, 1.0)):
            dens = np.array([float(coeffs.kappa(w, sgn * zz)) * float(coeffs.J(sgn * zz)) for zz in z]) * z
            cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(v))])
            self.side[k] = cum[-1]
            self.table.append((cum / cum[-1], z))

    @property
    def intensity(self) -> float:
        return float(self.side.sum())

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        right = rng.random(n) < self.side[1] / self.intensity
        u = rng.random(n)
        if self.alpha is not None:
            mag = self.cutoff * (1.0 - u) ** (-1.0 / self.alpha)
        else:
            mag = np.where(right, np.interp(u, *self.table[1]), np.interp(u, *self.table[0]))
        return np.where(right, mag, -mag)


def monte_carlo_density(coeffs: CoefficientSet, t: float, x: float, n_paths: int, small_jump_cutoff: float,
                        rng_seed: int = 12345, edges=None, w: Optional[float] = None,
                        max_jumps: float = 5e8, chunk: int = 100_000) -> MCHistogram:
    """Histogram of x + t b^w_cutoff + compound Poisson jumps of size >= cutoff (coefficients frozen at w)."""
    if small_jump_cutoff <= 0 or n_paths <= 0 or t <= 0:
        raise DomainError("need positive t, n_paths and cutoff")
    w = x if w is None else w
    sampler = _JumpSampler(coeffs, w, small_jump_cutoff)
    lam = sampler.intensity
    if lam * t * n_paths > max_jumps:
        raise BudgetError(f"expected {lam * t * n_paths:.3g} jumps exceed the budget {max_jumps:.3g}; "
                          "raise the cutoff or lower n_paths")
    drift = float(coeffs.effective_drift(w, small_jump_cutoff))
    edges = np.linspace(x - 2.0, x + 2.0, 81) if edges is None else np.asarray(edges, dtype=float)
    counts = np.zeros(edges.size - 1)
    # one child stream per chunk keeps results independent of chunk scheduling
    seeds = np.random.SeedSequence(rng_seed).spawn(int(math.ceil(n_paths / chunk)))
    done = 0
    for ss in seeds:
        m = min(chunk, n_paths - done)
        rng = np.random.default_rng(ss)
        nj = rng.poisson(lam * t, m)
        jumps = sampler.sample(rng, int(nj.sum()))
        owner = np.repeat(np.arange(m), nj)
        pos = x + t * drift + np.bincount(owner, weights=jumps, minlength=m)
        counts += np.histogram(pos, edges)[0]
        done += m
    width = np.diff(edges)
    prob = counts / n_paths
    return MCHistogram(edges, prob / width, np.sqrt(prob * (1 - prob) / n_paths) / width, n_paths, rng_seed,
                       small_jump_cutoff, lam, drift,
                       {"substreams": "SeedSequence.spawn per chunk", "chunk": chunk, "workers": 1})


def mc_vs_cauchy(hist: MCHistogram, t: float, x: float, kappa0: float = 1.0, n_sigma: float = 3.0) -> dict:
    """Fraction of bins whose MC density lies within n_sigma of the exact bin average."""
    e = hist.edges
    exact = (cauchy_cdf(t, e[1:] - x, kappa0) - cauchy_cdf(t, e[:-1] - x, kappa0)) / np.diff(e)
    dev = np.abs(hist.density - exact)
    ok = dev <= n_sigma * np.maximum(hist.stderr, 1e-300)
    return {"fraction_within": float(np.mean(ok)), "max_dev_sigma": float(np.max(dev / np.maximum(hist.stderr, 1e-300))),
            "sup_error": float(np.max(dev))}
