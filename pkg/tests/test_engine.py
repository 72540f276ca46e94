import numpy as np
import pytest

from parametrix.coefficients import example_catalog
from parametrix.engine import (EngineConfig, ParametrixEngine, assemble_p, export_csv, mass, q0_closed_form,
                               qn_iterate, read_csv, sum_q, time_levels, trapezoid_weights)
from parametrix.errors import BudgetError, DomainError, UnsupportedError

COARSE = dict(x_lo=-1.5, x_hi=2.5, dx=0.05)


def test_time_levels_closed_under_halving():
    lv = time_levels([0.01, 0.03, 0.05], 4, 1e-4)
    for t in (0.01, 0.03, 0.05):
        assert np.any(np.isclose(lv, t, rtol=1e-12))
    s = set(np.round(lv, 15))
    for v in lv:
        if v / 2 >= lv[0]:
            assert round(v / 2, 15) in s
    with pytest.raises(DomainError):
        time_levels([0.01], 4, 0.02)


def test_trapezoid_weights():
    y = np.array([0.0, 0.1, 0.3, 0.6])
    w = trapezoid_weights(y)
    assert w.sum() == pytest.approx(0.6)
    assert w @ y == pytest.approx(0.18)  # exact for linear integrands


def test_node_grid_and_split_cells(ex1):
    c, p, ah = ex1
    e = ParametrixEngine(c, p, ah, EngineConfig(**COARSE))
    split = e.x[e.K]
    # a(x) = 1 + sqrt(x) departs from its linear model next to 0 and has a kink at 1
    assert np.any(np.isclose(split, 0.0)) and np.any(np.isclose(split, 1.0))
    assert e.w_nodes.sum() == pytest.approx(e.x[-1] - e.x[0])
    assert np.all(np.diff(e.nodes[e.order]) > 0)


def test_config_errors(ex1):
    c, p, ah = ex1
    with pytest.raises(DomainError):
        ParametrixEngine(c, p, ah, EngineConfig(eps0=0.5))
    with pytest.raises(DomainError):
        ParametrixEngine(c, p, ah, EngineConfig(sub_cells=4))
    e = ParametrixEngine(c, p, ah, EngineConfig(**COARSE))
    with pytest.raises(DomainError):
        e.build([0.5])


def test_unsupported_profile():
    c, p, ah = example_catalog("ex3")
    with pytest.raises(UnsupportedError):
        ParametrixEngine(c, p, ah, EngineConfig(**COARSE))


def test_budget_error_when_depth_cap_too_small(ex1):
    c, p, ah = ex1
    e = ParametrixEngine(c, p, ah, EngineConfig(**COARSE, n_cap=1))
    with pytest.raises(BudgetError):
        e.build([0.02])


def test_q0_table_matches_closed_form(ex1, ex1_coarse):
    c, _, _ = ex1
    T = ex1_coarse.q0
    X, Y = np.meshgrid(T.x_grid, T.y_grid, indexing="ij")
    ref = q0_closed_form(c, 0.04, X, Y)
    np.fill_diagonal(ref, 0.0)
    assert np.allclose(T.slice(0.04), ref, rtol=1e-12, atol=1e-12)


def test_coarse_build_properties(ex1_coarse):
    r = ex1_coarse
    assert r.depth >= 3
    assert all(0 < q < 1 for q in r.ratios)
    for x in (-0.5, 0.25, 1.0):
        assert mass(r.p, 0.04, x) == pytest.approx(1.0, abs=2e-2)
    p, flags = assemble_p(r)
    assert p is r.p and flags.size == 0
    q = sum_q([qn_iterate(r, n) for n in range(r.depth + 1)])
    assert np.allclose(q.values, r.q.values, rtol=1e-10, atol=1e-10)
    with pytest.raises(DomainError):
        qn_iterate(r, r.depth + 5)
    with pytest.raises(BudgetError):
        sum_q([r.q0], tail=1.0, tol=1e-3)


def test_build_is_deterministic(ex1, ex1_coarse):
    c, p, ah = ex1
    again = ParametrixEngine(c, p, ah, EngineConfig(**COARSE)).build([0.02, 0.04])
    assert np.array_equal(again.p.values, ex1_coarse.p.values)


def test_csv_round_trip(tmp_path, ex1_coarse):
    T = ex1_coarse.p
    for name in ("p.csv", "p.csv.gz"):
        path = export_csv(T, str(tmp_path / name))
        back = read_csv(path, "p", T.weights())
        assert np.array_equal(back.values, T.values)
        assert np.array_equal(back.y_grid, T.y_grid)
    a, b = tmp_path / "a.csv.gz", tmp_path / "b.csv.gz"
    export_csv(T, str(a))
    export_csv(T, str(b))
    assert a.read_bytes() == b.read_bytes()
