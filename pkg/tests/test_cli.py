import json

import pytest

from parametrix.cli import main

CAUCHY = """
[run]
targets = [0.05, 0.1]
[coefficients]
catalog = "cauchy-const"
[grid]
x_lo = -2.0
x_hi = 2.0
dx = 0.05
[verify]
probes = [-0.5, 0.0, 0.5]
ck_pairs = [[0.05, 0.1]]
"""


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


@pytest.fixture(scope="module")
def cauchy_out(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    cfg = write(d, CAUCHY)
    assert main(["build", cfg, "--out", str(d / "out")]) == 0
    return d, cfg, d / "out"


def test_build_outputs(cauchy_out):
    _, _, out = cauchy_out
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "complete"
    assert {"p0", "q0", "q", "p", "q1"} <= set(man["files"])
    assert len(man["grids"]["nodes"]) == len(man["grids"]["weights"])
    assert (out / "assumptions.jsonl").exists() and (out / "build.jsonl").exists()


def test_build_is_bit_identical(cauchy_out):
    d, cfg, out = cauchy_out
    assert main(["build", cfg, "--out", str(d / "again")]) == 0
    for name in ("p.csv.gz", "q.csv.gz", "manifest.json"):
        assert (out / name).read_bytes() == (d / "again" / name).read_bytes()


def test_verify_passes(cauchy_out):
    _, cfg, out = cauchy_out
    assert main(["verify", cfg, "--out", str(out)]) == 0
    lines = [json.loads(s) for s in (out / "verify.jsonl").read_text().splitlines()]
    summaries = {r["check"]: r for r in lines if r["type"] == "summary"}
    assert {"mass", "positivity", "chapman_kolmogorov", "contraction", "envelope"} <= set(summaries)


def test_export_slice_and_full(cauchy_out, tmp_path):
    d, _, out = cauchy_out
    cfg = write(tmp_path, CAUCHY + "[export]\nt = 0.05\nx = 0.0\n")
    assert main(["export", cfg, "--out", str(out)]) == 0
    header = (out / "slice_t0.05_x0.csv").read_text().splitlines()[0]
    assert header == "y,weight,p,envelope"
    cfg = write(tmp_path, CAUCHY, "full.toml")
    assert main(["export", cfg, "--out", str(out)]) == 0
    assert (out / "export_full.csv").exists()
    cfg = write(tmp_path, CAUCHY + "[export]\nt = 0.07\nx = 0.0\n", "off.toml")
    assert main(["export", cfg, "--out", str(out)]) == 2


def test_export_with_mc(cauchy_out, tmp_path):
    _, _, out = cauchy_out
    cfg = write(tmp_path, CAUCHY + "[export]\nt = 0.05\nx = 0.0\n[mc]\nenabled = true\nn_paths = 20000\ncutoff = 1e-2\n")
    assert main(["export", cfg, "--out", str(out)]) == 0
    assert (out / "slice_t0.05_x0_mc.csv").read_text().startswith("y,mc_density,mc_stderr,p")


def test_check_assumptions_exit_codes(tmp_path):
    good = write(tmp_path, '[coefficients]\ncatalog = "ex1"\nsigma = 0.9\ns = 0.9\n', "good.toml")
    bad = write(tmp_path, '[coefficients]\ncatalog = "ex1"\nsigma = 1.0\ns = 1.0\n', "bad.toml")
    assert main(["check-assumptions", good, "--out", str(tmp_path / "g")]) == 0
    assert main(["check-assumptions", bad, "--out", str(tmp_path / "b")]) == 1
    lines = [json.loads(s) for s in (tmp_path / "b" / "assumptions.jsonl").read_text().splitlines()]
    failed = [r["check"] for r in lines if r["type"] == "summary" and not r["passed"]]
    assert failed == ["cancellation_scale"]


def test_build_refuses_failed_assumptions(tmp_path):
    bad = write(tmp_path, '[coefficients]\ncatalog = "ex1"\nsigma = 1.0\ns = 1.0\n')
    assert main(["build", bad, "--out", str(tmp_path / "o")]) == 1
    assert json.loads((tmp_path / "o" / "manifest.json").read_text())["status"] == "assumptions_failed"


def test_build_failure_writes_partial_manifest(tmp_path):
    text = CAUCHY.replace("dx = 0.05", "dx = 0.05\nfloor_factor = 1000.0")
    cfg = write(tmp_path, text)
    assert main(["build", cfg, "--out", str(tmp_path / "o"), "--force"]) == 1
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["status"] == "failed" and "floor" in man["error"]


def test_usage_errors(tmp_path):
    assert main(["build", write(tmp_path, "[run\n")]) == 2
    assert main(["verify", write(tmp_path, CAUCHY), "--out", str(tmp_path / "empty")]) == 2
    assert main(["frobnicate", "x.toml"]) == 2
    assert main([]) == 2
    ex3 = write(tmp_path, '[run]\ntargets = [0.001]\n[coefficients]\ncatalog = "ex3"\n', "ex3.toml")
    assert main(["build", ex3, "--out", str(tmp_path / "u"), "--force"]) == 2


def test_bench(tmp_path):
    cfg = write(tmp_path, CAUCHY)
    assert main(["bench", cfg, "--out", str(tmp_path / "b")]) == 0
    rec = json.loads((tmp_path / "b" / "bench.json").read_text())
    assert rec["build_s"] > 0 and rec["workers"] == 1


def test_compose_mode_build(tmp_path):
    text = CAUCHY.replace("targets = [0.05, 0.1]", "targets = [0.05, 0.1, 0.4]\ncompose = true")
    cfg = write(tmp_path, text)
    assert main(["build", cfg, "--out", str(tmp_path / "o")]) == 0
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["composed"] == {"0.4": {"base": 0.2, "doublings": 1}}
    assert man["t_tables"]["p"] == [0.05, 0.1, 0.2, 0.4]
