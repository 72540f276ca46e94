import pytest

from parametrix.config import DEFAULT_SEED, load_config, parse_config
from parametrix.errors import ConfigError


def test_defaults():
    cfg = parse_config({})
    assert cfg.coeffs.name == "ex1"
    assert cfg.seed == DEFAULT_SEED
    assert cfg.engine.dx == 0.025 and cfg.engine.eps0 is None
    assert cfg.targets == [0.01, 0.02, 0.04, 0.05]


def test_catalog_overrides_and_drift_section():
    cfg = parse_config({"coefficients": {"catalog": "ex1", "sigma": 1.0, "s": 1.0}})
    assert cfg.params.sigma == 1.0 and cfg.params.pairs == ((0.5, 1.0),)
    cfg = parse_config({"drift": {"sigma": 0.8, "pairs": [[0.5, 0.95]], "variant": "A_star"}})
    assert cfg.params.sigma == 0.8 and cfg.params.pairs == ((0.5, 0.95),)


def test_piecewise_coefficients():
    cfg = parse_config({"coefficients": {"catalog": "piecewise", "a_nodes": [0.0, 1.0], "a_values": [1.0, 2.0],
                                         "k_minus": 0.5, "k_plus": 1.5},
                        "profile": {"kind": "power", "alpha": 1.0}})
    a = cfg.coeffs.product.a
    assert a(-1.0) == 1.0 and a(0.5) == pytest.approx(1.5) and a(4.0) == 2.0
    assert cfg.coeffs.product.k_sides == (0.5, 1.5)
    assert cfg.params.pairs == ((1.0, 1.0),)


@pytest.mark.parametrize("data, msg", [
    ({"bogus": {}}, "unknown section"),
    ({"grid": {"dz": 1.0}}, "unknown keys"),
    ({"coefficients": {"catalog": "nope"}}, "unknown catalog"),
    ({"run": {"targets": [0.02, 0.01]}}, "strictly increasing"),
    ({"run": {"targets": []}}, "non-empty"),
    ({"run": {"targets": [0.01, 1.0]}}, "exceed t0"),
    ({"series": {"eps0": 0.5}}, "outside the admissible window"),
    ({"series": {"eps0": "big"}}, "eps0"),
    ({"series": {"n_max": 0}}, "n_max"),
    ({"grid": {"x_lo": 1.0, "x_hi": 0.0}}, "x_lo < x_hi"),
    ({"grid": {"dx": "fine"}}, "must be a number"),
    ({"run": {"seed": -1}}, "seed"),
    ({"verify": {"ck_pairs": [[0.04, 0.02]]}}, "ck_pairs"),
    ({"profile": {"kind": "power"}}, "piecewise"),
    ({"coefficients": {"catalog": "piecewise", "a_nodes": [0.0, 1.0], "a_values": [1.0]}}, "a_values"),
])
def test_invalid_configs(data, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(data)


def test_compose_mode_allows_long_horizons():
    cfg = parse_config({"run": {"targets": [0.1, 1.0], "compose": True}})
    base, plan = cfg.build_plan()
    # t0 = 1 / h(1) = 0.25 for the catalog profile
    assert plan[1.0] == (0.25, 2)
    assert plan[0.1] == (0.1, 0)
    assert base == [0.1, 0.25]


def test_load_config_errors(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[run\n")
    with pytest.raises(ConfigError):
        load_config(str(p))
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.toml"))
    p.write_text('[run]\ntargets = [0.01]\nseed = 3\n')
    assert load_config(str(p)).seed == 3
