"""Parametrix series on a uniform spatial grid and a geometric time grid.

Notation.  p0(t, x, y) = g(a(y) t, y - x) is the kernel frozen at y,
q0(t, x, y) = (a(x) - a(y)) d_s g(a(y) t, y - x) its error under the true
operator (product-form coefficients with b = b0 a), and

    q_n = int_0^t int q0(t - s, x, z) q_{n-1}(s, z, y) dz ds,
    q   = sum_n q_n,
    p   = p0 + int_0^t int p0(t - s, x, z) q(s, z, y) dz ds.

Space.  Left factors are integrated exactly over each z-cell (cell masses of
the closed-form kernel with a frozen at the cell centre plus the first-order
Taylor term of a inside the cell).  Right factors are point values.  Cells
where a is far from linear (kinks, square-root onsets) are split into odd
numbers of sub-cells whose centres join the grid as extra nodes, so every
table lives on the nodes with matching quadrature weights.

Time.  Levels form a geometric grid closed under halving.  Each
convolution at level t splits [0, t] at t/2: on [0, t/2] the right factor is
integrated exactly over each panel (through its running time integral) and
the left factor is taken at the panel midpoint; on [t/2, t] the roles swap,
with right-factor values interpolated between stored levels.  Levels below
twice the floor use the small-time limit where q_n grows like t^n.
"""
from __future__ import annotations

import csv
import gzip
import hashlib
import io
import json
import math
import os
import platform
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special

from .coefficients import CoefficientSet, DriftParameters, epsilon0_window
from .errors import BudgetError, DomainError, ResolutionError
from .family import CellSet, CellTables, Stable1Family

# ---------------------------------------------------------------------------
# configuration and tables


@dataclass
class EngineConfig:
    x_lo: float = -2.5
    x_hi: float = 3.5
    dx: float = 0.025
    per_octave: int = 4
    floor_factor: float = 0.02  # lowest level = floor_factor * dx / max a
    series_tol: float = 1e-6  # empirical tail of sum_n int |q_n| dy, times t
    n_min: int = 3
    n_cap: int = 40
    n_max: Optional[int] = None  # fixed depth overrides the adaptive rule
    eps0: Optional[float] = None
    flag_tol: float = 1e-3  # cells where a leaves its linear model by more than this are split
    sub_cells: int = 9  # odd

    def refined(self, factor: int = 2) -> "EngineConfig":
        out = EngineConfig(**asdict(self))
        out.dx = self.dx / factor
        return out


@dataclass
class KernelTable:
    """Kernel values indexed (t, x, y) with provenance."""

    t_grid: np.ndarray
    x_grid: np.ndarray
    y_grid: np.ndarray
    values: np.ndarray
    kind: str
    quad_err: np.ndarray
    meta: dict = field(default_factory=dict)
    # (t, x, side) -> (mass beyond the edge, density at the edge) of a reference kernel
    tail_model: Optional[Callable] = field(default=None, repr=False, compare=False)
    # quadrature weights over y_grid; trapezoidal when absent
    y_weights: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        if self.values.shape != (self.t_grid.size, self.x_grid.size, self.y_grid.size):
            raise DomainError("table values must be indexed (t, x, y)")
        if not np.all(np.isfinite(self.values)):
            raise ResolutionError(f"non-finite entries in the {self.kind} table")
        if self.kind in ("q", "p") and self.meta.get("series_depth", 0) < 1:
            raise DomainError("q and p tables need series_depth >= 1")

    def t_index(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.t_grid - t)))
        if not math.isclose(self.t_grid[i], t, rel_tol=1e-9):
            raise DomainError(f"t={t:g} is not on the table grid")
        return i

    def x_index(self, x: float) -> int:
        i = int(np.argmin(np.abs(self.x_grid - x)))
        if abs(self.x_grid[i] - x) > 1e-9 * max(1.0, abs(x)):
            raise DomainError(f"x={x:g} is not on the table grid")
        return i

    def weights(self) -> np.ndarray:
        if self.y_weights is not None:
            return np.asarray(self.y_weights, dtype=float)
        return trapezoid_weights(self.y_grid)

    def slice(self, t: float) -> np.ndarray:
        return self.values[self.t_index(t)]


@dataclass
class SeriesBudget:
    """Series truncation data.

    tail_bound is the analytic bound C3^{n+1} prod_k B(eps0/2, k eps0/2)
    t^{-1} r_t^{(n+1) eps0} at n = n_max + 1 with the fitted C3; the depth
    itself follows the measured decay of the norms (see sum_q).
    """

    eps0: float
    n_max: int
    tail_bound: float
    beta_factors: list
    C3: float = float("nan")
    empirical_tail: float = float("nan")

    @staticmethod
    def beta_product(eps0: float, n: int) -> float:
        a = 0.5 * eps0
        return float(np.prod([special.beta(a, k * a) for k in range(1, n + 1)])) if n > 0 else 1.0

    @staticmethod
    def norm_bound(C3: float, eps0: float, n: int, t: float, r_t: float) -> float:
        return C3 ** (n + 1) * SeriesBudget.beta_product(eps0, n) * r_t ** ((n + 1) * eps0) / t


def trapezoid_weights(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    w = np.zeros_like(y)
    d = np.diff(y)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


# ---------------------------------------------------------------------------
# time grid


def time_levels(targets, per_octave: int, floor: float) -> np.ndarray:
    """Geometric levels in [floor, max(targets)] containing the targets, closed under halving."""
    targets = np.sort(np.asarray(targets, dtype=float))
    top = targets[-1]
    if floor >= targets[0]:
        raise DomainError("time floor must lie below the smallest target")
    reps = {}
    for t in targets:
        k = math.floor(math.log2(top / t))
        f = round(math.log2(top / t) - k, 12)
        reps.setdefault(f, t * 2.0 ** k)
    for j in range(per_octave):
        f = round(j / per_octave, 12)
        if not any(abs(f - g) < 1e-9 for g in reps):
            reps[f] = top * 2.0 ** (-j / per_octave)
    levels = []
    for base in reps.values():
        v = base
        while v >= floor:
            levels.append(v)
            v *= 0.5
    return np.array(sorted(set(levels)))


# ---------------------------------------------------------------------------
# engine


class ParametrixEngine:
    """Builds p0, q0, q_n, q and p tables for product-form 1-stable coefficients."""

    def __init__(self, coeffs: CoefficientSet, drift_params: DriftParameters, alpha_h: float,
                 cfg: Optional[EngineConfig] = None):
        self.coeffs = coeffs
        self.params = drift_params
        self.alpha_h = alpha_h
        self.cfg = cfg or EngineConfig()
        self.family = Stable1Family.from_coeffs(coeffs)
        window = epsilon0_window(drift_params, alpha_h, coeffs.eps_kappa)
        self.eps0 = self.cfg.eps0 if self.cfg.eps0 is not None else window.midpoint
        if not window.contains(self.eps0):
            raise DomainError(f"eps0={self.eps0} outside the window ({window.lo}, {window.hi})")
        c = self.cfg
        n = int(round((c.x_hi - c.x_lo) / c.dx)) + 1
        self.x = c.x_lo + c.dx * np.arange(n)
        self.N = n
        pf = coeffs.product
        self.a = np.asarray(pf.a(self.x), dtype=float)
        self.da = (np.asarray(pf.a(self.x + c.dx), dtype=float) - np.asarray(pf.a(self.x - c.dx), dtype=float)) / (2 * c.dx)
        self.ua, self.inv = np.unique(self.a, return_inverse=True)
        ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        self.offset_idx = (jj - ii) + (n - 1)  # column j relative to row i
        self.diag = np.arange(n)
        self._flag_cells()
        self.tables: Optional[CellTables] = None
        self.aux: Optional[CellSet] = None
        self.stats: dict = {}

    def _flag_cells(self, samples: int = 41):
        """Split cells where a leaves a_k + a'_k (z - z_k) by more than flag_tol.

        The sub-cell centres become extra nodes: extra rows of every right factor
        and extra columns (the sub-cells) of every left factor.  Entries that
        involve them are evaluated pair by pair from a table of relative cells.
        """
        c = self.cfg
        m = int(c.sub_cells)
        if m < 1 or m % 2 == 0:
            raise DomainError("sub_cells must be a positive odd integer")
        a = self.coeffs.product.a
        u = np.linspace(-0.5, 0.5, samples) * c.dx
        dev = np.abs(np.asarray(a(self.x[:, None] + u[None, :]), dtype=float)
                     - self.a[:, None] - self.da[:, None] * u[None, :]).max(axis=1)
        self.K = np.flatnonzero(dev > c.flag_tol)
        h = c.dx / m
        # node positions in units of h from x_lo
        sub_units = (m * self.K[:, None] + (np.arange(m) - (m - 1) // 2)[None, :]).ravel()
        self.sub_z = self.x[0] + h * sub_units
        self.S = self.sub_z.size
        sub_a = np.asarray(a(self.sub_z), dtype=float).reshape(self.sub_z.shape)
        sub_da = (np.asarray(a(self.sub_z + h), dtype=float) - np.asarray(a(self.sub_z - h), dtype=float)) / (2 * h)
        self.a_ext = np.concatenate([self.a, sub_a])
        self.da_ext = np.concatenate([self.da, sub_da])
        self.pair_row = self.pair_col = self.pair_cell = np.zeros(0, dtype=int)
        self.aux_cells = (np.zeros(0), np.zeros(0), np.zeros(0))
        if self.S == 0:
            self._extend_nodes()
            return
        N, S = self.N, self.S
        units = np.concatenate([m * np.arange(N), sub_units])
        grid_cols = np.setdiff1d(np.arange(N), self.K)
        rows, cols = [], []
        for r, cc in ((np.arange(N), N + np.arange(S)),  # entries outside the grid-grid block
                      (N + np.arange(S), grid_cols),
                      (N + np.arange(S), N + np.arange(S))):
            R, C = np.meshgrid(r, cc, indexing="ij")
            rows.append(R.ravel())
            cols.append(C.ravel())
        rows, cols = np.concatenate(rows), np.concatenate(cols)
        # full cells for grid columns, sub-cells otherwise
        key = (units[cols] - units[rows]) * 2 + (cols < N)
        uk, inv = np.unique(key, return_inverse=True)
        rel = uk // 2
        half = np.where(uk % 2 == 1, 0.5 * c.dx, 0.5 * h)
        self.aux_cells = (rel * h - half, rel * h + half, rel * h)
        self.pair_row, self.pair_col, self.pair_cell = rows, cols, inv
        self._extend_nodes()

    def _extend_nodes(self):
        """Nodes = grid points, then sub-cell centres that are not grid points.

        Weights: trapezoidal on the grid, h on every sub-cell of a split cell.
        """
        N, m = self.N, int(self.cfg.sub_cells)
        q = np.tile(np.arange(m), self.K.size)
        centre = q == (m - 1) // 2
        self.keep = np.flatnonzero(~centre)
        self.sel = np.concatenate([np.arange(N), N + self.keep])
        self.centre_pos = N + np.flatnonzero(centre)
        self.nodes = np.concatenate([self.x, self.sub_z[self.keep]])
        self.a_nodes = self.a_ext[self.sel]
        w = trapezoid_weights(self.x)
        w[self.K] = self.cfg.dx / m
        self.w_nodes = np.concatenate([w, np.full(self.keep.size, self.cfg.dx / m)])
        self.order = np.argsort(self.nodes, kind="stable")
        n = self.nodes.size
        R, C = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        extra = (R >= N) | (C >= N)
        self.pt_row, self.pt_col = R[extra], C[extra]

    # ------------------------------------------------------------------ blocks
    def _ensure_tables(self, t_lo: float, t_hi: float):
        s_min = float(self.a_ext.min()) * t_lo * 1e-3
        s_max = float(self.a_ext.max()) * t_hi * 1.01
        tb = self.tables
        if tb is None or tb.s[0] > s_min or tb.s[-1] < s_max:
            self.tables = CellTables(self.family, self.cfg.dx, self.N - 1, s_min, s_max)
            if self.S:
                self.aux = CellSet(self.family, *self.aux_cells, s_min, s_max)

    def _gather(self, rows: np.ndarray) -> np.ndarray:
        """Matrix M[i, k] = rows[unique index of column k, offset k - i]."""
        return rows[self.inv[None, :], self.offset_idx]

    def _point_rows(self, fn, t: float) -> np.ndarray:
        offs = self.cfg.dx * np.arange(-(self.N - 1), self.N)
        return fn(self.ua[:, None] * t, offs[None, :])

    # Left factors integrate over z-cells exactly for the kernel frozen at the cell
    # centre; a(z) = a_k + a'_k (z - z_k) inside the cell enters to first order.
    # Every left factor has the form a(x) X - Y.
    _NEED = {"W": ("C_ds", "N1_ds"), "IL": ("C", "N1"), "IIL": ("A", "AN1"),
             "P0": ("C", "N1_ds"), "IP0": ("A", "AN1", "N1")}

    @staticmethod
    def _xy(kind: str, b: dict, ak, da, tau: float):
        if kind == "W":
            return b["C_ds"] - da / ak * b["N1_ds"], ak * b["C_ds"]
        if kind == "IL":
            return b["C"] / ak - da / ak ** 2 * b["N1"], b["C"]
        if kind == "IIL":
            return b["A"] / ak ** 2 - da / ak ** 3 * b["AN1"], b["A"] / ak
        if kind == "P0":
            return None, -(b["C"] + da * tau * b["N1_ds"])
        return None, -(b["A"] / ak + da / ak ** 2 * (ak * tau * b["N1"] - b["AN1"]))

    def block(self, kind: str, tau: float) -> np.ndarray:
        """Left factor over the z-cells at time tau (or its time integrals up to tau).

        Rows are the nodes; column k is the grid cell of node k, or for a split
        cell the sub-cell around node k.
        """
        need = self._NEED[kind]
        N, n = self.N, self.N + self.S
        tb = self.tables
        sv = self.ua * tau
        base = tb.rows(sv, [k for k in need if k not in ("A", "AN1")])
        if "A" in need:
            base["A"] = tb.A_at(sv)
        if "AN1" in need:
            base["AN1"] = tb.AN1_at(sv)
        b = {}
        for k, v in base.items():
            full = np.zeros((n, n))
            full[:N, :N] = self._gather(v)
            b[k] = full
        if self.S:
            vals = self.aux.pairs(self.a_ext[self.pair_col] * tau, self.pair_cell, need)
            for k, v in vals.items():
                b[k][self.pair_row, self.pair_col] = v
        X, Y = self._xy(kind, b, self.a_ext[None, :], self.da_ext[None, :], tau)
        M = -Y if X is None else self.a_ext[:, None] * X - Y
        # a split cell's middle sub-cell multiplies the grid row at its centre
        M[:, self.K] = M[:, self.centre_pos]
        return M[np.ix_(self.sel, self.sel)]

    def W(self, tau: float) -> np.ndarray:
        """int_cell q0(tau, x_i, z) dz."""
        return self.block("W", tau)

    def IL(self, u: float) -> np.ndarray:
        """int_0^u W(tau) dtau."""
        return self.block("IL", u)

    def IIL(self, u: float) -> np.ndarray:
        """int_0^u IL(tau) dtau."""
        return self.block("IIL", u)

    def P0cell(self, tau: float) -> np.ndarray:
        return self.block("P0", tau)

    def IP0cell(self, u: float) -> np.ndarray:
        return self.block("IP0", u)

    def _point_matrix(self, fn, t: float) -> np.ndarray:
        """fn(a(y) t, y - z) for z (rows) and y (columns) over the nodes."""
        N, n = self.N, self.nodes.size
        M = np.empty((n, n))
        M[:N, :N] = self._gather(self._point_rows(fn, t))
        if n > N:
            c = self.pt_col
            M[self.pt_row, c] = fn(self.a_nodes[c] * t, self.nodes[c] - self.nodes[self.pt_row])
        return M

    def P0pt(self, t: float) -> np.ndarray:
        return self._point_matrix(self.family.g, t)

    def Q0pt(self, t: float) -> np.ndarray:
        """q0(t, z, y) over the nodes."""
        an = self.a_nodes
        M = (an[:, None] - an[None, :]) * self._point_matrix(self.family.dg_ds, t)
        np.fill_diagonal(M, 0.0)
        return M

    def IQ0pt(self, t: float) -> np.ndarray:
        """int_0^t q0."""
        an = self.a_nodes
        M = (an[:, None] / an[None, :] - 1.0) * self._point_matrix(self.family.g, t)
        np.fill_diagonal(M, 0.0)
        return M

    # ------------------------------------------------------------------ time grid
    def _levels(self, targets) -> np.ndarray:
        floor = self.cfg.floor_factor * self.cfg.dx / float(self.a.max())
        return time_levels(targets, self.cfg.per_octave, floor)

    @staticmethod
    def _interp(levels: np.ndarray, stack: np.ndarray, upto: int, t: float) -> np.ndarray:
        """Cubic Lagrange interpolation in log t of t * stack over levels[:upto + 1]."""
        lo = max(0, upto - 3)
        idx = np.arange(lo, upto + 1)
        if idx.size > 4:
            idx = idx[-4:]
        # centre the stencil on t where possible
        j = int(np.searchsorted(levels[: upto + 1], t))
        start = min(max(0, j - 2), max(0, upto - 3))
        idx = np.arange(start, min(start + 4, upto + 1))
        xs = np.log(levels[idx])
        x = math.log(t)
        out = np.zeros_like(stack[0])
        for a_, ia in enumerate(idx):
            w = 1.0
            for b_, ib in enumerate(idx):
                if a_ != b_:
                    w *= (x - xs[b_]) / (xs[a_] - xs[b_])
            out += w * levels[ia] * stack[ia]
        return out / t

    # ------------------------------------------------------------------ build
    def build(self, targets, store_levels: bool = False) -> "BuildResult":
        targets = np.sort(np.asarray(targets, dtype=float))
        t0 = self.coeffs.profile.t0
        if targets[-1] > t0 * (1 + 1e-12):
            raise DomainError(f"series builds need T <= t0 = {t0:g}; compose longer horizons")
        levels = self._levels(targets)
        L = levels.size
        self._ensure_tables(levels[0], levels[-1])
        index = {float(v): i for i, v in enumerate(levels)}
        half = np.array([index.get(float(v * 0.5), -1) for v in levels])

        # cached level-edge integrals of the left factor
        IL_lv = np.stack([self.IL(v) for v in levels])
        IIL_lv = np.stack([self.IIL(v) for v in levels])
        IP_lv = np.stack([self.IP0cell(v) for v in levels])

        Qprev = np.stack([self.Q0pt(v) for v in levels])
        IQprev = np.stack([self.IQ0pt(v) for v in levels])
        Qsum, IQsum = Qprev.copy(), IQprev.copy()
        tgt_idx = [index[float(v)] for v in targets]
        per_n = {0: Qprev[tgt_idx].copy()}
        norms = [self._l1(Qprev, levels)]
        ratios = []
        n = 0
        depth_cap = self.cfg.n_max if self.cfg.n_max is not None else self.cfg.n_cap
        empirical_tail = float("inf")
        while n < depth_cap:
            n += 1
            Qn = np.empty_like(Qprev)
            IQn = np.empty_like(IQprev)
            for m, t in enumerate(levels):
                h = half[m]
                if h < 0:
                    Qn[m] = (t / n) * (self.W(t) @ Qprev[m])
                    IQn[m] = t / (n + 1) * Qn[m]
                    continue
                Qn[m], IQn[m] = self._conv_level(levels, m, h, Qprev, IQprev, IL_lv, IIL_lv)
            Qprev, IQprev = Qn, IQn
            Qsum += Qn
            IQsum += IQn
            per_n[n] = Qn[tgt_idx].copy()
            norms.append(self._l1(Qn, levels))
            # contraction of sup_x int |q_n| dy, weighted by t
            with np.errstate(divide="ignore", invalid="ignore"):
                q = np.where(norms[-1] == 0, 0.0, norms[-1] / norms[-2])
            r = np.nanmax(q)
            ratios.append(float(r))
            if self.cfg.n_max is None and n >= self.cfg.n_min:
                rho = max(ratios[-2:])
                if rho < 1:
                    empirical_tail = float(np.max(levels * norms[-1]) * rho / (1 - rho))
                    if empirical_tail <= self.cfg.series_tol:
                        break
        if self.cfg.n_max is None and not empirical_tail <= self.cfg.series_tol:
            raise BudgetError(f"series tail {empirical_tail:.3g} above tolerance after {n} terms; "
                              "use a larger n_cap or a smaller horizon")
        if self.cfg.n_max is not None and len(ratios) >= 1:
            rho = max(ratios[-2:])
            empirical_tail = float(np.max(levels * norms[-1]) * rho / (1 - rho)) if rho < 1 else float("inf")

        # assemble p at the targets
        n_nodes = self.nodes.size
        P = np.empty((targets.size, n_nodes, n_nodes))
        for a_, m in enumerate(tgt_idx):
            P[a_] = self.P0pt(levels[m]) + self._conv_p(levels, m, half[m], Qsum, IQsum, IP_lv)

        res = BuildResult(self, targets, levels, per_n, Qsum[tgt_idx], P, norms, ratios, n, empirical_tail)
        if store_levels:
            res.level_Q, res.level_IQ = self.sorted(Qsum), self.sorted(IQsum)
        return res

    def _l1(self, Q: np.ndarray, levels: np.ndarray) -> np.ndarray:
        """sup over x of int |q(t, x, y)| dy for every level."""
        return np.max(np.abs(Q) @ self.w_nodes, axis=1)

    def sorted(self, stack: np.ndarray) -> np.ndarray:
        """Node-ordered (..., z, y) arrays rearranged to increasing positions."""
        o = self.order
        return stack[..., o[:, None], o[None, :]]

    def _panels(self, levels: np.ndarray, h: int):
        edges = np.concatenate([[0.0], levels[: h + 1]])
        mids = 0.5 * (edges[:-1] + edges[1:])
        return edges, mids

    @staticmethod
    def _panel_diffs(stack: np.ndarray, h: int) -> np.ndarray:
        """Increments of a running time integral over the panels [0, l_0], [l_0, l_1], ..."""
        return np.concatenate([stack[0:1], stack[1: h + 1] - stack[:h]], axis=0)

    def _conv_level(self, levels, m, h, R, IR, IL_lv, IIL_lv):
        t = levels[m]
        _, mids = self._panels(levels, h)
        P = mids.size
        # s in [0, t/2]: right factor integrated over each panel
        flat = self._panel_diffs(IR, h).reshape(P * R.shape[1], -1)
        q = np.concatenate([self.W(t - s) for s in mids], axis=1) @ flat
        iq = np.concatenate([self.IL(t - s) for s in mids], axis=1) @ flat
        # u = t - s in [0, t/2]: left factor integrated over each panel
        Rs = np.concatenate([self._interp(levels, R, m, t - u) for u in mids], axis=0)
        q += np.concatenate(list(self._panel_diffs(IL_lv, h)), axis=1) @ Rs
        iq += np.concatenate(list(self._panel_diffs(IIL_lv, h)), axis=1) @ Rs
        return q, iq

    def _conv_p(self, levels, m, h, Q, IQ, IP_lv):
        t = levels[m]
        if h < 0:
            return self.P0cell(0.5 * t) @ IQ[m]
        _, mids = self._panels(levels, h)
        P = mids.size
        dIQ = self._panel_diffs(IQ, h).reshape(P * Q.shape[1], -1)
        out = np.concatenate([self.P0cell(t - s) for s in mids], axis=1) @ dIQ
        Rs = np.concatenate([self._interp(levels, Q, m, t - u) for u in mids], axis=0)
        out += np.concatenate(list(self._panel_diffs(IP_lv, h)), axis=1) @ Rs
        return out


# ---------------------------------------------------------------------------
# build products


class BuildResult:
    """Tables at the target times plus series diagnostics."""

    def __init__(self, engine: ParametrixEngine, targets, levels, per_n, Q, P, norms, ratios, depth,
                 empirical_tail):
        self.engine = engine
        self.targets = targets
        self.levels = levels
        self.per_n = per_n
        self.norms = norms
        self.ratios = ratios
        self.depth = depth
        self.empirical_tail = empirical_tail
        self.level_Q = None
        self.level_IQ = None
        x = engine.nodes[engine.order]
        w = engine.w_nodes[engine.order]
        meta = self.meta()

        def table(vals, kind, err=None, **extra):
            vals = engine.sorted(vals)
            return KernelTable(targets, x, x, vals, kind, np.zeros_like(vals) if err is None else err,
                               dict(meta, **extra), y_weights=w)

        self.p0 = table(np.stack([engine.P0pt(t) for t in targets]), "p0")
        self.qn = {n: table(v, f"qn({n})", n=n) for n, v in per_n.items()}
        self.q0 = self.qn[0]
        err = self.tail_err()
        self.q = table(Q, "q", err)
        self.p = table(P, "p", err * targets[:, None, None])
        self.p.tail_model = self.p0.tail_model = self.tail_model
        self.budget = self._budget()
        self.p.meta["budget"] = asdict(self.budget)

    def tail_model(self, t: float, x: float, side: int) -> tuple:
        e = self.engine
        return edge_tail_model(e.coeffs, float(e.x[0]), float(e.x[-1]), e.family)(t, x, side)

    def meta(self) -> dict:
        e = self.engine
        return {
            "coefficients": e.coeffs.name,
            "eps0": e.eps0,
            "series_depth": int(self.depth),
            "dx": e.cfg.dx,
            "x_lo": float(e.x[0]),
            "x_hi": float(e.x[-1]),
            "per_octave": e.cfg.per_octave,
            "levels": int(self.levels.size),
            "t_floor": float(self.levels[0]),
            "split_cells": [float(v) for v in e.x[e.K]],
            "sub_cells": int(e.cfg.sub_cells),
        }

    def tail_err(self) -> np.ndarray:
        """Per-entry tail estimate: empirical series tail spread uniformly over y."""
        e = self.engine
        width = e.x[-1] - e.x[0]
        val = self.empirical_tail / max(width, 1e-300)
        n = e.nodes.size
        return np.full((self.targets.size, n, n), val / self.targets[:, None, None].max())

    def fitted_C3(self) -> float:
        """Smallest C3 with sup_x int |q0(t, x, .)| <= C3 t^{-1} r_t^{eps0} on the levels."""
        e = self.engine
        prof = e.coeffs.profile
        r = np.array([float(prof.r_t(t)) for t in self.levels])
        return float(np.max(self.norms[0] * self.levels / r ** e.eps0))

    def _budget(self) -> SeriesBudget:
        e = self.engine
        C3 = self.fitted_C3()
        T = float(self.targets[-1])
        r_T = float(e.coeffs.profile.r_t(T))
        bound = SeriesBudget.norm_bound(C3, e.eps0, self.depth + 1, T, r_T)
        betas = [float(special.beta(0.5 * e.eps0, 0.5 * k * e.eps0)) for k in range(1, self.depth + 2)]
        return SeriesBudget(e.eps0, int(self.depth), bound, betas, C3, self.empirical_tail)

    def l1_norms(self, n: int) -> np.ndarray:
        """int |q_n(t, x, y)| dy for targets (rows) and x (columns)."""
        tab = self.qn[n]
        return np.abs(tab.values) @ tab.weights()


def edge_tail_model(coeffs: CoefficientSet, lo: float, hi: float, family: Optional[Stable1Family] = None) -> Callable:
    """Frozen kernel beyond the grid edges with a taken at the edge point."""
    fam = family if family is not None else Stable1Family.from_coeffs(coeffs)

    def model(t: float, x: float, side: int) -> tuple:
        edge = lo if side < 0 else hi
        s = float(coeffs.product.a(edge)) * t
        u = edge - x
        far = 1e12 * side
        a, b = (far, u) if side < 0 else (u, far)
        return float(fam.mass(s, a, b)), float(fam.g(s, u))
    return model


# ---------------------------------------------------------------------------
# operations on tables


def q0_eval(coeffs: CoefficientSet, t: float, x: float, y: float, r: Optional[float] = None,
            check_r_invariance: bool = False, rtol: float = 1e-3) -> float:
    """(L_x - L_x^{K_y}) p^{K_y}(t, x, y) through the frozen generator."""
    from .frozen import FrozenKernelEvaluator, FrozenSymbol

    ev = FrozenKernelEvaluator(FrozenSymbol(coeffs, y))
    tab = ev.table(t)
    def diff(rr):
        gx = np.ravel(ev.apply_generator(x, t, x, y, r=rr, table=tab))[0]
        gy = np.ravel(ev.apply_generator(y, t, x, y, r=rr, table=tab))[0]
        return float(gx - gy)

    val = diff(r)
    if check_r_invariance:
        alt = diff(1.0)
        if abs(alt - val) > rtol * max(abs(val), 1e-12) + 1e-8:
            raise ResolutionError(f"q0 differs between r = r_t and r = 1: {val} vs {alt}")
    return val


def q0_closed_form(coeffs: CoefficientSet, t: float, x, y) -> np.ndarray:
    """(a(x) - a(y)) d_s g(a(y) t, y - x) for 1-stable product forms."""
    fam = Stable1Family.from_coeffs(coeffs)
    a = coeffs.product.a
    ax, ay = np.asarray(a(x), dtype=float), np.asarray(a(y), dtype=float)
    return (ax - ay) * fam.dg_ds(ay * t, np.asarray(y, dtype=float) - np.asarray(x, dtype=float))


def qn_iterate(result: BuildResult, n: int) -> KernelTable:
    """q_n tables from a build (the recursion runs inside ParametrixEngine.build)."""
    if n not in result.qn:
        raise DomainError(f"build stopped at depth {result.depth}; q_{n} not available")
    return result.qn[n]


def sum_q(q_tables: list, tail: float = 0.0, tol: float = float("inf")) -> KernelTable:
    """Entrywise sum of q_n tables with the tail estimate added to quad_err."""
    if not q_tables:
        raise DomainError("need at least one table")
    if tail > tol:
        raise BudgetError(f"series tail {tail:.3g} exceeds tolerance {tol:.3g}; increase n_max or reduce T")
    base = q_tables[0]
    vals = np.sum([q.values for q in q_tables], axis=0)
    err = np.sum([q.quad_err for q in q_tables], axis=0) + tail
    meta = dict(base.meta, series_depth=max(1, len(q_tables) - 1))
    return KernelTable(base.t_grid, base.x_grid, base.y_grid, vals, "q", err, meta)


def assemble_p(result: BuildResult, tol: float = 1e-3) -> tuple:
    """p table of a build plus the list of entries below -tol * max."""
    P = result.p.values
    flags = np.argwhere(P < -tol * np.max(P, axis=(1, 2), keepdims=True))
    return result.p, flags


def mass(table: KernelTable, t: float, x: float) -> float:
    """int p(t, x, y) dy: weighted grid sum plus the mass beyond both grid edges.

    Tables with a tail model scale its exact tail mass by the ratio of table value
    to model value at the edge; otherwise a z^-2 tail centred at x is assumed.
    """
    i, j = table.t_index(t), table.x_index(x)
    row = table.values[i, j]
    y = table.y_grid
    inner = float(row @ table.weights())
    tails = 0.0
    for side, edge, val in ((-1, y[0], row[0]), (1, y[-1], row[-1])):
        if table.tail_model is not None:
            tail_mass, edge_value = table.tail_model(float(table.t_grid[i]), float(x), side)
            tails += val * tail_mass / edge_value if edge_value > 0 else 0.0
        else:
            tails += val * abs(edge - x)
    return inner + tails


def apply_Pt(table: KernelTable, f: Callable, t: float, x: float) -> float:
    """P_t f(x) = int p(t, x, y) f(y) dy on the grid (f bounded)."""
    fy = np.asarray(f(table.y_grid), dtype=float)
    if not np.all(np.isfinite(fy)):
        raise DomainError("f must be finite on the y grid")
    i, j = table.t_index(t), table.x_index(x)
    row = table.values[i, j]
    return float(np.sum(row * fy * table.weights()))


def compose(table: KernelTable, s: float, t: float) -> np.ndarray:
    """int p(s, x, z) p(t - s, z, y) dz on the grid."""
    A = table.slice(s)
    B = table.slice(t - s)
    return (A * table.weights()[None, :]) @ B


def time_derivative_check(coeffs: CoefficientSet, result: BuildResult, f: Callable, t: float, x: float,
                          h_rel: float = 0.05) -> dict:
    """Compare a central difference of P_t f(x) in t with the generator applied to P_t f.

    P_{t+-h} f comes from the engine; L P_t f uses the jump integral of the
    interpolated function y -> P_t f(y) on the grid.
    """
    e = result.engine
    h = h_rel * t
    sub = e.build([t - h, t, t + h])
    nodes = sub.p.x_grid
    vals = [np.array([apply_Pt(sub.p, f, tt, xx) for xx in nodes]) for tt in (t - h, t, t + h)]
    fd = (vals[2] - vals[0]) / (2 * h)
    Lf = generator_on_grid(coeffs, nodes, vals[1], nodes)
    j = int(np.argmin(np.abs(nodes - x)))
    scale = float(np.max(np.abs(fd)))
    return {"t": t, "x": float(nodes[j]), "fd": float(fd[j]), "generator": float(Lf[j]),
            "residual": float(abs(fd[j] - Lf[j])), "scale": scale}


def generator_on_grid(coeffs: CoefficientSet, grid: np.ndarray, values: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """L u(x) for u given on an increasing grid (cubic interpolation, zero slope outside)."""
    from scipy.interpolate import CubicSpline

    from .quadrature import gauss_panels

    sp = CubicSpline(grid, values, bc_type="natural")
    lo, hi = grid[0], grid[-1]
    d1, d2 = sp.derivative(1), sp.derivative(2)

    def u(y):
        return sp(np.clip(y, lo, hi))

    out = np.empty(len(xs))
    for i, x in enumerate(xs):
        r = 1.0
        b = float(coeffs.effective_drift(float(x), r))
        rho = 0.5 * float(np.min(np.diff(grid)))
        zs, ws = gauss_panels(np.concatenate([rho * np.geomspace(1e-8, 1, 17)]), 6)
        th, wth = np.polynomial.legendre.leggauss(8)
        th, wth = 0.5 * (th + 1), 0.5 * wth
        acc = 0.0
        for sgn in (1.0, -1.0):
            z = sgn * zs
            k = np.asarray(coeffs.kappa(float(x), z)) * np.asarray(coeffs.J(z)) * ws * z * z
            yy = np.clip(x + th[:, None] * z[None, :], lo, hi)
            acc += float(np.sum(((1 - th) * wth) @ (d2(yy) * k[None, :])))
            edges = np.unique(np.concatenate([np.geomspace(rho, 1e3, 400), np.linspace(rho, hi - lo + 1, 1200)]))
            zo, wo = gauss_panels(edges, 4)
            zz = sgn * zo
            k = np.asarray(coeffs.kappa(float(x), zz)) * np.asarray(coeffs.J(zz)) * wo
            small = np.abs(zz) < r
            acc += float(np.sum((u(x + zz) - u(x) - np.where(small, zz, 0.0) * d1(x)) * k))
        out[i] = b * float(d1(x)) + acc
    return out


# ---------------------------------------------------------------------------
# export


def _fmt(v: float) -> str:
    return f"{v:.16e}"


def export_csv(table: KernelTable, path: str) -> str:
    """Columns t, x, y, value, quad_err; rows in (t, x, y) order.

    A path ending in .gz is gzip-compressed with a zero timestamp, so equal
    tables give equal bytes.
    """
    with open(path, "wb") as raw:
        stream = gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) if path.endswith(".gz") else raw
        with io.TextIOWrapper(stream, encoding="ascii", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x", "y", "value", "quad_err"])
            for i, t in enumerate(table.t_grid):
                for j, x in enumerate(table.x_grid):
                    ft, fx = _fmt(t), _fmt(x)
                    w.writerows([ft, fx, _fmt(y), _fmt(v), _fmt(e)] for y, v, e in
                                zip(table.y_grid, table.values[i, j], table.quad_err[i, j]))
    return path


def read_csv(path: str, kind: str = "p", y_weights=None) -> KernelTable:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    if data.ndim == 1:
        data = data[None, :]
    ts, xs, ys = (np.unique(data[:, c]) for c in range(3))
    shape = (ts.size, xs.size, ys.size)
    if data.shape[0] != int(np.prod(shape)):
        raise DomainError(f"{path}: rows do not form a full (t, x, y) grid")
    return KernelTable(ts, xs, ys, data[:, 3].reshape(shape), kind, data[:, 4].reshape(shape), {"series_depth": 1},
                       y_weights=None if y_weights is None else np.asarray(y_weights, dtype=float))


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path: str, result: BuildResult, files: dict, config: dict) -> dict:
    e = result.engine
    man = {
        "config": config,
        "grids": {"t": [float(v) for v in result.targets], "x_lo": float(e.x[0]), "x_hi": float(e.x[-1]),
                  "dx": e.cfg.dx, "n_x": e.N, "levels": [float(v) for v in result.levels],
                  "nodes": [float(v) for v in e.nodes[e.order]],
                  "weights": [float(v) for v in e.w_nodes[e.order]]},
        "eps0": e.eps0,
        "series_depth": result.depth,
        "norm_ratios": result.ratios,
        "budget": asdict(result.budget),
        "engine": asdict(e.cfg),
        "files": {k: {"path": os.path.basename(v), "sha256": file_digest(v)} for k, v in files.items()},
        "workers": 1,
        "platform": {"python": platform.python_version(), "numpy": np.__version__},
    }
    with open(path, "w") as fh:
        json.dump(man, fh, indent=2, sort_keys=True, default=float)
    return man
