"""Batch front-end: parametrix {check-assumptions, build, verify, export, bench} CONFIG.

Exit codes: 0 pass, 1 check or verification failure, 2 usage, config or
missing-input error.  Only --out and --force override the config file.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import platform
import sys
import time
from typing import Optional

import numpy as np

from . import __version__
from .bounds import envelope_spec, fit_envelope, pointwise_bound
from .coefficients import check_assumptions
from .config import RunConfig, load_config
from .engine import (BuildResult, KernelTable, ParametrixEngine, edge_tail_model, export_csv, file_digest,
                     read_csv, write_manifest)
from .errors import ConfigError, DomainError, ParametrixError, UnsupportedError
from .oracles import default_probes, mc_vs_cauchy, monte_carlo_density, run_residual_suite
from .reports import VerificationReport, write_jsonl

log = logging.getLogger("parametrix")

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
TABLE_SUFFIX = ".csv.gz"


class UsageError(Exception):
    """Missing inputs or out-of-range requests (exit 2)."""


# ---------------------------------------------------------------------------
# helpers


def _out_dir(cfg: RunConfig, override: Optional[str]) -> str:
    out = override or cfg.out
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def _oracle_report(results: list, name: str) -> VerificationReport:
    """Fold oracle results into one report (ratio = error / tolerance)."""
    rep = VerificationReport(name, kind="verify")
    for r in results:
        tol = r.tolerance.get("abs", r.tolerance.get("rel", math.nan))
        err = r.abs_err if "abs" in r.tolerance else r.rel_err
        rep.add(dict(r.inputs, check=r.name), err, tol, oracle=r.oracle_value, engine=r.engine_value,
                passed=r.passed)
    rep.passed = all(r.passed for r in results)
    return rep


def _load_tables(table_dir: str, cfg: RunConfig) -> tuple:
    man_path = os.path.join(table_dir, "manifest.json")
    if not os.path.isfile(man_path):
        raise UsageError(f"no manifest.json in {table_dir}; run build first")
    with open(man_path, encoding="utf-8") as fh:
        man = json.load(fh)
    if man.get("status") != "complete" or "p" not in man.get("files", {}):
        raise UsageError(f"{man_path} describes an incomplete build")
    path = os.path.join(table_dir, man["files"]["p"]["path"])
    if not os.path.isfile(path):
        raise UsageError(f"missing table {path}")
    if file_digest(path) != man["files"]["p"]["sha256"]:
        raise UsageError(f"{path} does not match its manifest digest")
    g = man["grids"]
    table = read_csv(path, "p", g["weights"])
    if table.y_grid.size != len(g["weights"]):
        raise UsageError(f"{path} and the manifest disagree on the node grid")
    table.meta.update(coefficients=cfg.coeffs.name, eps0=man.get("eps0"))
    if cfg.coeffs.product is not None:
        table.tail_model = edge_tail_model(cfg.coeffs, float(table.y_grid[0]), float(table.y_grid[-1]))
    return table, man


def _compose_up(P: np.ndarray, w: np.ndarray, k: int) -> np.ndarray:
    for _ in range(k):
        P = (P * w[None, :]) @ P
    return P


def _assumption_reports(cfg: RunConfig) -> list:
    return check_assumptions(cfg.coeffs, cfg.params, cfg.alpha_h)


# ---------------------------------------------------------------------------
# subcommands


def cmd_check_assumptions(cfg: RunConfig, out: str, force: bool = False) -> int:
    reps = _assumption_reports(cfg)
    write_jsonl(os.path.join(out, "assumptions.jsonl"), reps)
    for r in reps:
        status = "pass" if r.passed else "FAIL"
        note = f"  ({'; '.join(r.notes)})" if r.notes and not r.passed else ""
        print(f"{status}  {r.check}{note}")
    return EXIT_PASS if all(r.passed for r in reps) else EXIT_FAIL


def _run_build(cfg: RunConfig) -> tuple:
    base, plan = cfg.build_plan()
    engine = ParametrixEngine(cfg.coeffs, cfg.params, cfg.alpha_h, cfg.engine)
    res = engine.build(base)
    return res, plan


def _p_with_compositions(res: BuildResult, plan: dict) -> KernelTable:
    p = res.p
    extra = [(t, b, k) for t, (b, k) in plan.items() if k > 0]
    if not extra:
        return p
    w = p.weights()
    ts = sorted(set(float(v) for v in p.t_grid) | {t for t, _, _ in extra})
    vals, errs = [], []
    for t in ts:
        hit = [e for e in extra if e[0] == t]
        if hit:
            _, b, k = hit[0]
            vals.append(_compose_up(p.slice(b), w, k))
            errs.append(p.quad_err[p.t_index(b)] * 2 ** k)
        else:
            vals.append(p.slice(t))
            errs.append(p.quad_err[p.t_index(t)])
    meta = dict(p.meta, composed={str(t): {"base": b, "doublings": k} for t, b, k in extra})
    out = KernelTable(np.array(ts), p.x_grid, p.y_grid, np.stack(vals), "p", np.stack(errs), meta,
                      y_weights=p.y_weights)
    out.tail_model = p.tail_model
    return out


def cmd_build(cfg: RunConfig, out: str, force: bool = False) -> int:
    man_path = os.path.join(out, "manifest.json")
    if not force:
        reps = _assumption_reports(cfg)
        write_jsonl(os.path.join(out, "assumptions.jsonl"), reps)
        failed = [r.check for r in reps if not r.passed]
        if failed:
            _write_json(man_path, {"status": "assumptions_failed", "failed": failed, "config": cfg.record()})
            print(f"assumption checks failed: {', '.join(failed)} (use --force to build anyway)")
            return EXIT_FAIL
    t_start = time.perf_counter()
    try:
        res, plan = _run_build(cfg)
    except UnsupportedError:
        raise
    except ParametrixError as exc:
        _write_json(man_path, {"status": "failed", "error": f"{type(exc).__name__}: {exc}",
                               "config": cfg.record(), "files": {}})
        print(f"build failed: {type(exc).__name__}: {exc}")
        return EXIT_FAIL
    elapsed = time.perf_counter() - t_start
    files = {}
    p = _p_with_compositions(res, plan)
    tables = [("p0", res.p0), ("q0", res.q0), ("q", res.q), ("p", p)]
    tables += [(f"q{n}", res.qn[n]) for n in sorted(res.qn) if n > 0]
    for name, tab in tables:
        files[name] = export_csv(tab, os.path.join(out, name + TABLE_SUFFIX))
    series = VerificationReport("series", kind="build")
    for n, row in enumerate(res.norms):
        prev = res.norms[n - 1] if n else np.ones_like(row)
        for t, v, u in zip(res.levels, row, prev):
            series.add({"n": n, "t": float(t)}, float(v), float(u))
    series.fitted.update(C3=res.budget.C3, empirical_tail=res.empirical_tail, depth=res.depth)
    series.notes.append("lhs = sup_x int |q_n(t, x, y)| dy on each level, rhs = the same for n - 1")
    write_jsonl(os.path.join(out, "build.jsonl"), [series])
    man = write_manifest(man_path, res, files, cfg.record())
    man.update(status="complete", version=__version__,
               composed=p.meta.get("composed", {}), t_tables={"p": [float(v) for v in p.t_grid]})
    _write_json(man_path, man)
    print(f"built {len(files)} tables in {elapsed:.1f} s (depth {res.depth}, eps0 {res.engine.eps0:.4g}) -> {out}")
    return EXIT_PASS


def cmd_verify(cfg: RunConfig, out: str, force: bool = False) -> int:
    table, man = _load_tables(out, cfg)
    probes = cfg.probes if cfg.probes is not None else default_probes(table.x_grid)
    try:
        probes = [float(table.x_grid[table.x_index(x)]) for x in probes]
    except DomainError as exc:
        raise UsageError(f"verify probe off the node grid: {exc}") from exc
    series_t = [t for t in table.t_grid if t <= cfg.t0 * (1 + 1e-12)]
    results = run_residual_suite(table, probes, cfg.tolerances, cfg.ck_pairs)
    reps = [_oracle_report([r for r in results if r.name == n], n)
            for n in dict.fromkeys(r.name for r in results)]
    if series_t:
        sub = KernelTable(np.array(series_t), table.x_grid, table.y_grid,
                          np.stack([table.slice(t) for t in series_t]), "p",
                          np.stack([table.quad_err[table.t_index(t)] for t in series_t]), table.meta,
                          y_weights=table.y_weights)
        spec = envelope_spec(cfg.coeffs, cfg.params, cfg.alpha_h, "y", man.get("eps0"))
        try:
            fit = fit_envelope(sub, spec, cfg.coeffs)
            reps.append(fit.report)
        except ParametrixError as exc:
            rep = VerificationReport("envelope", passed=False, kind="envelope")
            rep.notes.append(str(exc))
            reps.append(rep)
    write_jsonl(os.path.join(out, "verify.jsonl"), reps)
    for r in reps:
        detail = f"max err/tol {r.max_ratio:.3g}" if r.records else ""
        if "c" in r.fitted:
            detail = f"c = {r.fitted['c']:.4g}"
        print(f"{'pass' if r.passed else 'FAIL'}  {r.check}  {detail}".rstrip())
    return EXIT_PASS if all(r.passed for r in reps) else EXIT_FAIL


def cmd_export(cfg: RunConfig, out: str, force: bool = False) -> int:
    table, man = _load_tables(out, cfg)
    if cfg.export_t is None and cfg.export_x is None:
        path = os.path.join(out, "export_full.csv")
        export_csv(table, path)
        print(f"full table -> {path}")
        return EXIT_PASS
    if cfg.export_t is None or cfg.export_x is None:
        raise UsageError("a slice needs both export.t and export.x")
    t, x = cfg.export_t, cfg.export_x
    try:
        i, j = table.t_index(t), table.x_index(x)
    except DomainError as exc:
        raise UsageError(f"slice outside the table grid: {exc}") from exc
    y = table.y_grid
    env = np.full(y.size, np.nan)
    if t <= cfg.t0 * (1 + 1e-12):
        spec = envelope_spec(cfg.coeffs, cfg.params, cfg.alpha_h, "y", man.get("eps0"))
        fit = fit_envelope(KernelTable(np.array([t]), table.x_grid, y, table.values[i:i + 1], "p",
                                       table.quad_err[i:i + 1], table.meta), spec, cfg.coeffs)
        env = pointwise_bound(spec.with_scale(fit.c), cfg.coeffs, t, x, y)
    stem = f"slice_t{t:g}_x{x:g}"
    path = os.path.join(out, stem + ".csv")
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "weight", "p", "envelope"])
        for row in zip(y, table.weights(), table.values[i, j], env):
            w.writerow([f"{v:.16e}" for v in row])
    print(f"slice -> {path}")
    if cfg.mc_enabled:
        lo, hi = float(y[0]), float(y[-1])
        edges = np.linspace(max(lo, x - 2.0), min(hi, x + 2.0), 81)
        hist = monte_carlo_density(cfg.coeffs, t, x, cfg.mc_paths, cfg.mc_cutoff, cfg.seed, edges)
        c = hist.centers
        p_at = np.interp(c, y, table.values[i, j])
        mpath = os.path.join(out, stem + "_mc.csv")
        with open(mpath, "w", newline="", encoding="ascii") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["y", "mc_density", "mc_stderr", "p"])
            for row in zip(c, hist.density, hist.stderr, p_at):
                w.writerow([f"{v:.16e}" for v in row])
        print(f"MC histogram -> {mpath}")
    return EXIT_PASS


def cmd_bench(cfg: RunConfig, out: str, force: bool = False) -> int:
    """Time one build plus the Cauchy frozen-kernel check."""
    t_start = time.perf_counter()
    res, _ = _run_build(cfg)
    t_build = time.perf_counter() - t_start
    rec = {"build_s": t_build, "nodes": int(res.engine.nodes.size), "levels": int(res.levels.size),
           "depth": int(res.depth), "targets": cfg.targets, "workers": 1,
           "platform": {"python": platform.python_version(), "numpy": np.__version__}}
    if cfg.mc_enabled:
        t_start = time.perf_counter()
        hist = monte_carlo_density(cfg.coeffs, cfg.targets[0], 0.0, cfg.mc_paths, cfg.mc_cutoff, cfg.seed)
        rec["mc_s"] = time.perf_counter() - t_start
        if cfg.coeffs.name == "cauchy-const":
            rec["mc_vs_cauchy"] = mc_vs_cauchy(hist, cfg.targets[0], 0.0)
    _write_json(os.path.join(out, "bench.json"), rec)
    print(json.dumps(rec, sort_keys=True, default=float))
    return EXIT_PASS


COMMANDS = {"check-assumptions": cmd_check_assumptions, "build": cmd_build, "verify": cmd_verify,
            "export": cmd_export, "bench": cmd_bench}


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="parametrix", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", help="TOML run configuration")
        sp.add_argument("--out", help="output directory (overrides run.out)")
        if name == "build":
            sp.add_argument("--force", action="store_true", help="build even when assumption checks fail")
    return ap


def main(argv: Optional[list] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_USAGE
    try:
        cfg = load_config(args.config)
        out = _out_dir(cfg, args.out)
        return COMMANDS[args.command](cfg, out, getattr(args, "force", False))
    except (ConfigError, UsageError, UnsupportedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
