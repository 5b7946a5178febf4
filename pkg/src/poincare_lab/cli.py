"""Command-line entry point: verify, sweep, sample, sharpness."""
from __future__ import annotations

import argparse
import itertools
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import inequalities as ie
from . import measures as ms
from . import report as rp
from .config import ExperimentConfig, load_config
from .errors import ConfigError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _jobs_default() -> int:
    try:
        return max(1, int(os.environ.get("POINCARE_LAB_JOBS", "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="poincare-lab", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("verify", "sweep", "sample", "sharpness"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--out", type=Path, default=Path("."))
        sp.add_argument("--seed-override", type=int, default=None)
        sp.add_argument("--jobs", type=int, default=None)
        sp.add_argument("--explore", action="store_true", help="gate failures do not affect the exit code")
    return ap


def _apply_seed(cfg: ExperimentConfig, seed):
    if seed is None:
        return cfg
    upd = {"suite": cfg.suite.model_copy(update={"seed": seed}),
           "estimator": cfg.estimator.model_copy(update={"seed": seed})}
    if cfg.sample is not None:
        upd["sample"] = cfg.sample.model_copy(update={"seed": seed})
    return cfg.model_copy(update=upd)


def _estimator_mode(cfg):
    return None if cfg.estimator.mode == "auto" else cfg.estimator.mode


def _run(cfg: ExperimentConfig, params: dict, jobs: int, seed_offset: int = 0):
    est = cfg.estimator
    return ie.run_suite(cfg.variant, params, count=cfg.suite.count, degree=cfg.suite.degree,
                        seed=est.seed + cfg.suite.seed + seed_offset, N=est.N, estimator=_estimator_mode(cfg),
                        nodes=est.nodes, jobs=jobs, kind=cfg.suite.kind)


def _exit_code(summary, explore):
    if summary["counts"]["FAIL"]:
        return EXIT_FAIL
    if summary["gate_violations"] and not explore:
        return EXIT_FAIL
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, out: Path, jobs: int, explore: bool) -> int:
    if cfg.variant is None:
        raise ConfigError("verify needs a variant")
    res = _run(cfg, cfg.params.as_dict(), jobs)
    summary = rp.summarize(res.verdicts, res.gates)
    body = {"summary": summary, "suite_gates": [[n, bool(ok)] for n, ok in res.gates],
            "verdicts": [v.to_dict() for v in res.verdicts]}
    prefix = cfg.output.prefix
    rp.write_json(out / f"{prefix}.json", rp.envelope("verify", cfg.model_dump(mode="json"), body))
    rp.write_csv(out / f"{prefix}.csv", rp.VERDICT_COLUMNS,
                 [rp.verdict_row(i, v) for i, v in enumerate(res.verdicts)])
    return _exit_code(summary, explore)


def _grid_cells(grid: dict):
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ConfigError("sweep grid is empty")
    keys = sorted(grid)
    return keys, [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def _cell_seed(seed: int, cell: int) -> int:
    return int(np.random.SeedSequence(int(seed), spawn_key=(int(cell),)).generate_state(1)[0])


def cmd_sweep(cfg: ExperimentConfig, out: Path, jobs: int, explore: bool) -> int:
    if cfg.variant is None:
        raise ConfigError("sweep needs a variant")
    keys, cells = _grid_cells(cfg.grid or {})
    base = cfg.params.as_dict()
    for k in keys:
        if k not in type(cfg.params).model_fields:
            raise ConfigError(f"unknown grid parameter {k!r}")

    def run_cell(i):
        params = dict(base, **cells[i])
        return ie.run_suite(cfg.variant, params, count=cfg.suite.count, degree=cfg.suite.degree,
                            seed=_cell_seed(cfg.estimator.seed + cfg.suite.seed, i), N=cfg.estimator.N,
                            estimator=_estimator_mode(cfg), nodes=cfg.estimator.nodes, kind=cfg.suite.kind)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(run_cell, range(len(cells))))
    else:
        results = [run_cell(i) for i in range(len(cells))]

    header = ["cell"] + keys + ["count", "pass", "fail", "inconclusive", "gates_passed", "worst_z_margin",
                                 "worst_lhs", "worst_rhs", "worst_margin", "mean_lhs", "mean_rhs", "seed"]
    rows, fails, gate_bad = [], 0, False
    for i, (cell, res) in enumerate(zip(cells, results)):
        c = res.counts()
        worst = min(res.verdicts, key=lambda v: (v.z_margin if np.isfinite(v.z_margin) else np.inf))
        gp = all(ok for _, ok in res.gates) and all(v.gates_passed for v in res.verdicts)
        fails += c["FAIL"]
        gate_bad |= not gp
        rows.append([i] + [cell[k] for k in keys] + [
            len(res.verdicts), c["PASS"], c["FAIL"], c["INCONCLUSIVE"], gp, worst.z_margin, worst.lhs,
            worst.rhs, worst.margin, float(np.mean([v.lhs for v in res.verdicts])),
            float(np.mean([v.rhs for v in res.verdicts])), _cell_seed(cfg.estimator.seed + cfg.suite.seed, i)])
    prefix = cfg.output.prefix
    rp.write_csv(out / f"{prefix}_sweep.csv", header, rows)
    rp.write_json(out / f"{prefix}_sweep.json", rp.envelope("sweep", cfg.model_dump(mode="json"), {
        "cells": [{"cell": i, "params": cells[i], "counts": r.counts(),
                   "suite_gates": [[n, bool(ok)] for n, ok in r.gates]} for i, r in enumerate(results)]}))
    if fails or (gate_bad and not explore):
        return EXIT_FAIL
    return EXIT_OK


def build_measure(desc) -> ms.Measure:
    fam = desc.family
    need = lambda *names: [getattr(desc, n) for n in names]
    if any(v is None for v in need(*{"RegularSimplex": ("n",), "CornerSimplex": ("n",), "LpBall": ("n", "p"),
                                      "Interval": ("a", "b"), "OrthantProduct": ("n", "alpha"),
                                      "WeightedSimplex": ("n",)}[fam])):
        raise ConfigError(f"missing parameters for {fam}")
    if fam == "RegularSimplex":
        return ms.RegularSimplex(desc.n)
    if fam == "CornerSimplex":
        return ms.CornerSimplex(desc.n)
    if fam == "LpBall":
        return ms.LpBall(desc.n, desc.p)
    if fam == "Interval":
        return ms.Interval(desc.a, desc.b)
    if fam == "OrthantProduct":
        return ms.OrthantProduct.iid(ms.PowerExp(desc.alpha), desc.n)
    c = 1.0 if desc.c is None else desc.c
    return ms.WeightedSimplex(desc.n, ie.sqrt_sum_phi(c), 0.5 if desc.q is None else desc.q)


def cmd_sample(cfg: ExperimentConfig, out: Path, jobs: int, explore: bool) -> int:
    if cfg.sample is None:
        raise ConfigError("sample needs a 'sample' section")
    try:
        meas = build_measure(cfg.sample.measure)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    pts = meas.sample(cfg.sample.seed, cfg.sample.N)
    header = [f"x{i}" for i in range(pts.shape[1])]
    comments = [f"measure={meas.descriptor()}", f"seed={cfg.sample.seed}", f"N={cfg.sample.N}",
                f"toolkit={rp.TOOLKIT} {__version__}"]
    rp.write_csv(out / f"{cfg.output.prefix}_samples.csv", header, [list(map(float, r)) for r in pts], comments)
    return EXIT_OK


def cmd_sharpness(cfg: ExperimentConfig, out: Path, jobs: int, explore: bool) -> int:
    sh = cfg.sharpness
    if sh is None:
        if cfg.variant != "Cor44":
            raise ConfigError("sharpness needs a 'sharpness' section or variant Cor44")
        dims = [cfg.params.n or 2]
        variant = "Cor44"
    else:
        dims, variant = sh.dims, sh.variant
    reps = [ie.sharpness_probe(variant, n) for n in dims]
    body = {"probes": [r.to_dict() for r in reps], "max_relative_gap": max(r.relative_gap for r in reps)}
    rp.write_json(out / f"{cfg.output.prefix}_sharpness.json", rp.envelope("sharpness", cfg.model_dump(mode="json"), body))
    rp.write_csv(out / f"{cfg.output.prefix}_sharpness.csv", ["variant", "n", "lhs", "rhs", "relative_gap"],
                 [[r.variant, r.n, float(r.lhs), float(r.rhs), r.relative_gap] for r in reps])
    return EXIT_OK if all(r.relative_gap <= 1e-12 for r in reps) else EXIT_FAIL


COMMANDS = {"verify": cmd_verify, "sweep": cmd_sweep, "sample": cmd_sample, "sharpness": cmd_sharpness}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    jobs = args.jobs if args.jobs is not None else _jobs_default()
    t0 = time.perf_counter()
    try:
        cfg = _apply_seed(load_config(args.config), args.seed_override)
        explore = args.explore or cfg.explore
        args.out.mkdir(parents=True, exist_ok=True)
        code = COMMANDS[args.command](cfg, args.out, max(1, jobs), explore)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failure of an evaluation
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    # Wall time lives in a sidecar so reports stay byte-identical across runs.
    rp.write_json(args.out / f"{cfg.output.prefix}_timing.json",
                  {"command": args.command, "wall_time_s": round(time.perf_counter() - t0, 6)})
    return code


if __name__ == "__main__":
    sys.exit(main())
