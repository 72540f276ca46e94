"""Run configuration: a single TOML file, validated into a RunConfig.

Schema (every table and key optional unless noted)::

    [run]
    out = "out"                     # output directory (--out overrides)
    seed = 12345
    targets = [0.01, 0.02, 0.04, 0.05]
    compose = false                 # allow targets above t0 through repeated composition

    [coefficients]
    catalog = "ex1"                 # a catalog name, or "piecewise"
    sigma = 0.9                     # catalog exponent overrides
    s = 0.9
    b_const = 0.0                   # cauchy-const only
    # piecewise: a is linear between nodes and constant outside
    a_nodes = [0.0, 1.0]
    a_values = [1.0, 2.0]
    k_minus = 0.5
    k_plus = 1.5
    b0 = 0.0
    c_kappa = 3.0
    eps_kappa = 1.0

    [profile]                       # piecewise only
    kind = "power"                  # power | log_decay | log_inv | log_grow | oscillating
    alpha = 1.0
    scale = 1.0
    alpha_h = 1.0

    [drift]                         # replaces the catalog drift parameters
    sigma = 0.9
    pairs = [[0.5, 0.9]]
    variant = "A_star"

    [grid]
    x_lo = -2.5
    x_hi = 3.5
    dx = 0.025
    per_octave = 4
    floor_factor = 0.02

    [series]
    eps0 = "auto"                   # or a number inside the window
    n_max = "auto"                  # or a fixed depth
    tol = 1e-6

    [tolerances]
    mass = 1e-2
    positivity = 1e-3
    ck = 5e-2
    contraction = 1e-2

    [verify]
    probes = [-0.5, 0.25, 1.0]
    ck_pairs = [[0.02, 0.04]]

    [export]
    t = 0.05                        # omit both keys to echo the full table
    x = 0.25

    [mc]
    enabled = false
    n_paths = 1000000
    cutoff = 1e-3
"""
from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .coefficients import (CATALOG_NAMES, CoefficientSet, DriftParameters, _product, epsilon0_window,
                           example_catalog)
from .engine import EngineConfig
from .errors import AssumptionViolation, ConfigError, DomainError
from .oracles import SuiteTolerances
from .profiles import LevyProfile, log_profile, oscillating_profile, power_profile

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_SEED = 12345

_KEYS = {
    "run": {"out", "seed", "targets", "compose"},
    "coefficients": {"catalog", "sigma", "s", "b_const", "a_nodes", "a_values", "k_minus", "k_plus", "b0",
                     "c_kappa", "eps_kappa"},
    "profile": {"kind", "alpha", "scale", "alpha_h", "eps"},
    "drift": {"sigma", "pairs", "variant"},
    "grid": {"x_lo", "x_hi", "dx", "per_octave", "floor_factor", "flag_tol", "sub_cells"},
    "series": {"eps0", "n_max", "tol"},
    "tolerances": {"mass", "positivity", "ck", "contraction"},
    "verify": {"probes", "ck_pairs"},
    "export": {"t", "x"},
    "mc": {"enabled", "n_paths", "cutoff"},
}


@dataclass
class RunConfig:
    coeffs: CoefficientSet
    params: DriftParameters
    alpha_h: float
    engine: EngineConfig
    targets: list
    out: str = "out"
    seed: int = DEFAULT_SEED
    compose: bool = False
    tolerances: SuiteTolerances = field(default_factory=SuiteTolerances)
    probes: Optional[list] = None
    ck_pairs: Optional[list] = None
    export_t: Optional[float] = None
    export_x: Optional[float] = None
    mc_enabled: bool = False
    mc_paths: int = 1_000_000
    mc_cutoff: float = 1e-3
    raw: dict = field(default_factory=dict)

    @property
    def t0(self) -> float:
        return float(self.coeffs.profile.t0)

    def build_plan(self) -> tuple:
        """(times to build, {target: (base time, number of doublings)}) for compose mode."""
        plan, base = {}, set()
        for t in self.targets:
            k = 0
            while t / 2 ** k > self.t0 * (1 + 1e-12):
                k += 1
            plan[t] = (t / 2 ** k, k)
            base.add(t / 2 ** k)
        return sorted(base), plan

    def record(self) -> dict:
        return {"source": self.raw, "seed": self.seed, "targets": self.targets, "compose": self.compose,
                "alpha_h": self.alpha_h, "drift": asdict(self.params), "engine": asdict(self.engine),
                "tolerances": asdict(self.tolerances)}


def _num(section: dict, key: str, default, kind=float):
    v = section.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    return kind(v)


def _increasing(name: str, values) -> list:
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{name} must be a non-empty list")
    try:
        out = [float(v) for v in values]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must contain numbers") from exc
    if any(not math.isfinite(v) for v in out) or any(b <= a for a, b in zip(out, out[1:])):
        raise ConfigError(f"{name} must be finite and strictly increasing")
    return out


def _profile(sec: dict) -> tuple:
    kind = sec.get("kind", "power")
    if kind == "power":
        alpha = _num(sec, "alpha", 1.0)
        return power_profile(alpha, scale=_num(sec, "scale", 1.0)), _num(sec, "alpha_h", alpha)
    if kind in ("log_decay", "log_inv", "log_grow"):
        return log_profile(kind, _num(sec, "eps", 0.5)), _num(sec, "alpha_h", 1.0 if kind == "log_grow" else 0.8)
    if kind == "oscillating":
        return oscillating_profile(int(_num(sec, "scale", 2.0))), _num(sec, "alpha_h", 0.75)
    raise ConfigError(f"unknown profile kind {kind!r}")


def _piecewise(sec: dict, prof: LevyProfile) -> CoefficientSet:
    nodes = np.array(_increasing("a_nodes", sec.get("a_nodes")))
    vals = sec.get("a_values")
    if not isinstance(vals, list) or len(vals) != nodes.size:
        raise ConfigError("a_values must match a_nodes in length")
    vals = np.array([float(v) for v in vals])
    if np.any(vals <= 0):
        raise ConfigError("a_values must be positive")
    km, kp = _num(sec, "k_minus", 1.0), _num(sec, "k_plus", 1.0)
    if km <= 0 or kp <= 0:
        raise ConfigError("k_minus and k_plus must be positive")

    def a(x):
        out = np.interp(np.asarray(x, dtype=float), nodes, vals)
        return float(out) if np.ndim(out) == 0 else out

    def k(z):
        out = np.where(np.asarray(z, dtype=float) < 0, km, kp)
        return float(out) if out.ndim == 0 else out

    ratio = max(vals.max(), 1.0 / vals.min()) * max(km, kp, 1.0 / min(km, kp))
    c_kappa = _num(sec, "c_kappa", max(1.0, float(ratio)))
    return _product(prof, a, k, b0=_num(sec, "b0", 0.0), k_sides=(km, kp), c_kappa=c_kappa,
                    eps_kappa=_num(sec, "eps_kappa", 1.0), name="piecewise")


def parse_config(data: dict) -> RunConfig:
    """Validate a decoded TOML document."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a table")
    for name, sec in data.items():
        if name not in _KEYS:
            raise ConfigError(f"unknown section [{name}]")
        if not isinstance(sec, dict):
            raise ConfigError(f"[{name}] must be a table")
        extra = set(sec) - _KEYS[name]
        if extra:
            raise ConfigError(f"unknown keys in [{name}]: {', '.join(sorted(extra))}")
    run, co, dr = data.get("run", {}), data.get("coefficients", {}), data.get("drift", {})
    gr, se, tol = data.get("grid", {}), data.get("series", {}), data.get("tolerances", {})
    ve, ex, mc = data.get("verify", {}), data.get("export", {}), data.get("mc", {})
    try:
        name = co.get("catalog", "ex1")
        if name == "piecewise":
            prof, alpha_h = _profile(data.get("profile", {}))
            coeffs = _piecewise(co, prof)
            params = None
        elif name in CATALOG_NAMES:
            if "profile" in data:
                raise ConfigError("[profile] applies to piecewise coefficients only")
            coeffs, params, alpha_h = example_catalog(name, _num(co, "sigma", None), _num(co, "s", None),
                                                      _num(co, "b_const", 0.0))
        else:
            raise ConfigError(f"unknown catalog entry {name!r}; known: {', '.join(CATALOG_NAMES)}, piecewise")
        if dr or params is None:
            pairs = dr.get("pairs", [[coeffs.eps_kappa, 1.0]])
            if not isinstance(pairs, list) or any(not isinstance(p, list) or len(p) != 2 for p in pairs):
                raise ConfigError("drift pairs must be a list of [eps_j, s_j]")
            base_sigma = params.sigma if params is not None else 1.0
            params = DriftParameters(_num(dr, "sigma", base_sigma), tuple((float(e), float(s)) for e, s in pairs),
                                     dr.get("variant", params.variant if params is not None else "A_star"))

        eps0 = se.get("eps0", "auto")
        if eps0 == "auto":
            eps0 = None
        elif isinstance(eps0, bool) or not isinstance(eps0, (int, float)):
            raise ConfigError("eps0 must be 'auto' or a number")
        n_max = se.get("n_max", "auto")
        if n_max == "auto":
            n_max = None
        elif isinstance(n_max, bool) or not isinstance(n_max, int) or n_max < 1:
            raise ConfigError("n_max must be 'auto' or a positive integer")
        if eps0 is not None:
            try:
                win = epsilon0_window(params, alpha_h, coeffs.eps_kappa)
            except AssumptionViolation:
                win = None
            if win is None or not win.contains(float(eps0)):
                raise ConfigError(f"eps0={eps0} lies outside the admissible window")
        eng = EngineConfig(
            x_lo=_num(gr, "x_lo", -2.5), x_hi=_num(gr, "x_hi", 3.5), dx=_num(gr, "dx", 0.025),
            per_octave=_num(gr, "per_octave", 4, int), floor_factor=_num(gr, "floor_factor", 0.02),
            series_tol=_num(se, "tol", 1e-6), n_max=n_max, eps0=None if eps0 is None else float(eps0),
            flag_tol=_num(gr, "flag_tol", 1e-3), sub_cells=_num(gr, "sub_cells", 9, int))
        if not eng.x_hi > eng.x_lo or not eng.dx > 0 or eng.dx > eng.x_hi - eng.x_lo:
            raise ConfigError("grid needs x_lo < x_hi and 0 < dx <= x_hi - x_lo")
        if eng.per_octave < 1 or not eng.floor_factor > 0:
            raise ConfigError("per_octave must be >= 1 and floor_factor > 0")
        targets = _increasing("run.targets", run.get("targets", [0.01, 0.02, 0.04, 0.05]))
        if targets[0] <= 0:
            raise ConfigError("targets must be positive")
        compose = run.get("compose", False)
        if not isinstance(compose, bool):
            raise ConfigError("run.compose must be a boolean")
        t0 = float(coeffs.profile.t0)
        if targets[-1] > t0 * (1 + 1e-12) and not compose:
            raise ConfigError(f"targets exceed t0 = {t0:g}; set run.compose = true for longer horizons")
        probes = _increasing("verify.probes", ve["probes"]) if "probes" in ve else None
        ck_pairs = None
        if "ck_pairs" in ve:
            ck_pairs = [(float(s), float(t)) for s, t in ve["ck_pairs"]]
            if any(not 0 < s < t for s, t in ck_pairs):
                raise ConfigError("ck_pairs need 0 < s < t")
        seed = run.get("seed", DEFAULT_SEED)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        out = run.get("out", "out")
        if not isinstance(out, str) or not out:
            raise ConfigError("run.out must be a non-empty string")
        mc_on = mc.get("enabled", False)
        if not isinstance(mc_on, bool):
            raise ConfigError("mc.enabled must be a boolean")
        n_paths = _num(mc, "n_paths", 1_000_000, int)
        cutoff = _num(mc, "cutoff", 1e-3)
        if n_paths < 1 or not cutoff > 0:
            raise ConfigError("mc needs n_paths >= 1 and cutoff > 0")
        tols = SuiteTolerances(mass=_num(tol, "mass", 1e-2), positivity=_num(tol, "positivity", 1e-3),
                               ck=_num(tol, "ck", 5e-2), contraction=_num(tol, "contraction", 1e-2))
        return RunConfig(coeffs, params, float(alpha_h), eng, targets, out, seed, compose, tols, probes, ck_pairs,
                         _num(ex, "t", None), _num(ex, "x", None), mc_on, n_paths, cutoff, data)
    except ConfigError:
        raise
    except (DomainError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data)
