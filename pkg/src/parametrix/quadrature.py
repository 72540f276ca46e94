"""Small quadrature helpers used across modules."""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def gauss_panels(edges, n: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights over consecutive panels."""
    edges = np.asarray(edges, dtype=float)
    x, w = _leggauss(n)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (b + a)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


def graded_edges(a: float, b: float, h0: float, ratio: float = 1.5) -> np.ndarray:
    """Panel edges on [a, b] growing geometrically away from a, first width h0."""
    if b <= a:
        return np.array([a, b])
    out = [a]
    h = min(h0, b - a)
    while out[-1] + h < b:
        out.append(out[-1] + h)
        h *= ratio
    out.append(b)
    return np.array(out)


def two_sided_edges(a: float, b: float, h0: float, ratio: float = 1.5) -> np.ndarray:
    """Panel edges on [a, b] graded toward both endpoints."""
    mid = 0.5 * (a + b)
    left = graded_edges(a, mid, h0, ratio)
    right = b - graded_edges(0.0, b - mid, h0, ratio)[::-1]
    return np.concatenate([left, right[1:] + 0.0])


@lru_cache(maxsize=16)
def tanh_sinh_rule(level: int = 6, t_max: float = 3.5):
    """Tanh-sinh nodes on (-1, 1) with step 2**-level."""
    h = 2.0 ** -level
    t = np.arange(-t_max, t_max + h / 2, h)
    s = 0.5 * np.pi * np.sinh(t)
    x = np.tanh(s)
    w = h * 0.5 * np.pi * np.cosh(t) / np.cosh(s) ** 2
    keep = np.abs(x) < 1.0
    # distance to the nearest endpoint, accurate where x is close to +-1
    dist = 1.0 / (np.exp(np.abs(s)) * np.cosh(s))
    return x[keep], w[keep], dist[keep]


def tanh_sinh(f, a: float, b: float, level: int = 6) -> float:
    """Integrate f over (a, b) with endpoint singularities allowed."""
    x, w, dist = tanh_sinh_rule(level)
    half = 0.5 * (b - a)
    nodes = np.where(x < 0, a + half * dist, b - half * dist)
    ok = (nodes > a) & (nodes < b)
    return float(half * np.sum(w[ok] * f(nodes[ok])))
