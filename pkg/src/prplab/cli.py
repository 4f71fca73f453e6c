"""Command line entry point.

Subcommands:
  run            batch-verify formulas for a YAML config, emit CSV reports
  htilde         print the discounted-payoff kernel table and its MC oracle
  oracle         run all sampling oracles and print a certification table
  list-formulas  applicability matrix (formula x model)

Exit codes: 0 all checks pass, 1 a tolerance or z-test breach (reports are
still written), 2 invalid configuration or arguments.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import mc_verify, representations as rep, solvers
from .config import ConfigError, ScenarioConfig, load_config
from .models import ModelSpec, build_bundle, make_scenario
from .representations import closed_form_Y, payoff_bundle
from .solvers import GAMMA, StateFunction

__all__ = ["main"]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _residual_block(args) -> np.ndarray:
    cfg, lo, hi = args
    out = np.empty((hi - lo, len(cfg.formulas)))
    for row, i in enumerate(range(lo, hi)):
        scn = make_scenario(cfg.model, cfg.horizon, cfg.master_seed, i)
        b = build_bundle(cfg.model, scn)
        pb = payoff_bundle(b, cfg.h)
        y = closed_form_Y(b, pb)
        for col, f in enumerate(cfg.formulas):
            assembled = rep._assemble(f, b, pb)
            target = rep._target(f, b, pb, y)
            out[row, col] = (assembled - target).max_abs()
    return out


def _residual_matrix(cfg: ScenarioConfig, threads: int) -> np.ndarray:
    n = cfg.n_paths
    if threads <= 1 or n < 2 * threads:
        return _residual_block((cfg, 0, n))
    bounds = np.linspace(0, n, threads + 1).astype(int)
    jobs = [(cfg, int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        blocks = list(pool.map(_residual_block, jobs))
    return np.vstack(blocks)


def _write_residuals(cfg: ScenarioConfig, res: np.ndarray, path: str) -> bool:
    all_pass = True
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["formula_id", "model", "h_name", "n_paths",
                    "batch_max", "batch_mean", "tolerance", "pass"])
        for col, f in enumerate(cfg.formulas):
            bmax = float(res[:, col].max())
            bmean = float(res[:, col].mean())
            ok = bmax <= cfg.tol_pathwise
            all_pass = all_pass and ok
            w.writerow([f, cfg.model.label, getattr(cfg.h, "name", "h"), cfg.n_paths,
                        _fmt(bmax), _fmt(bmean), _fmt(cfg.tol_pathwise),
                        "true" if ok else "false"])
    return all_pass


def _write_mc(cfg: ScenarioConfig, path: str) -> bool:
    all_pass = True
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["statistic", "estimate", "se", "z", "n_paths", "pass"])
        if cfg.mc_paths > 0:
            panel = mc_verify.martingale_panel(
                cfg.model, cfg.h, cfg.mc_paths, cfg.horizon, cfg.master_seed
            )
            for name, repo in panel.items():
                all_pass = all_pass and repo.passed
                w.writerow([name, _fmt(repo.estimate), _fmt(repo.se), _fmt(repo.z),
                            repo.n_paths, "true" if repo.passed else "false"])
    return all_pass


def _write_paths_sample(cfg: ScenarioConfig, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["path_index", "time", "N", "H", "Z", "M", "Mtau", "Mhat", "Y"])
        for i in range(min(cfg.paths_sample, cfg.n_paths)):
            scn = make_scenario(cfg.model, cfg.horizon, cfg.master_seed, i)
            b = build_bundle(cfg.model, scn)
            pb = payoff_bundle(b, cfg.h)
            y = closed_form_Y(b, pb)
            for j, t in enumerate(scn.grid.times):
                w.writerow([i, _fmt(float(t)),
                            _fmt(float(scn.N.vals[j])), _fmt(float(scn.H.vals[j])),
                            _fmt(float(b.Z.vals[j])), _fmt(float(b.M.vals[j])),
                            _fmt(float(b.Mtau.vals[j])), _fmt(float(b.Mhat.vals[j])),
                            _fmt(float(y.vals[j]))])


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.paths_sample is not None:
        cfg.paths_sample = args.paths_sample
    out_dir = args.out or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    res = _residual_matrix(cfg, args.threads)
    ok_res = _write_residuals(cfg, res, os.path.join(out_dir, "residuals.csv"))
    ok_mc = _write_mc(cfg, os.path.join(out_dir, "mc.csv"))
    _write_paths_sample(cfg, os.path.join(out_dir, "paths_sample.csv"))
    print(f"residuals: {'pass' if ok_res else 'FAIL'}  mc: {'pass' if ok_mc else 'FAIL'}")
    return 0 if ok_res and ok_mc else 1


def _parse_h(text: str):
    name, _, arg = text.partition(":")
    if name == "indicator":
        return StateFunction.indicator(int(arg or 0))
    if name == "constant":
        return StateFunction.constant(float(arg or 1.0))
    if name == "exponential":
        return StateFunction.exponential(float(arg or 1.0))
    raise ConfigError(f"unknown payoff spec '{text}' (use indicator:K, constant:C, exponential:B)")


def _cmd_htilde(args) -> int:
    try:
        h = _parse_h(args.h)
    except (ConfigError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return 2
    table = solvers.htilde_table(h)
    print(f"kernel table for h={h.name} (gamma = {_fmt(GAMMA)})")
    print("x  htilde(x)  recursion_residual")
    worst = 0.0
    for x in range(args.x_max + 1):
        v = float(table(np.array(float(x))))
        nxt = float(table(np.array(float(x + 1))))
        res = abs(v - (GAMMA * float(h(np.array(float(x)))) + (1.0 - GAMMA) * nxt))
        worst = max(worst, res)
        print(f"{x}  {_fmt(v)}  {_fmt(res)}")
    est, se, bound = solvers.htilde_mc_oracle(h, args.x, args.mc_paths, args.seed)
    target = float(table(np.array(float(args.x))))
    z = (est - target) / se if se > 0 else 0.0
    ok = abs(z) <= 3.0 and worst <= 1e-12
    print(f"mc oracle at x={args.x}: estimate={_fmt(est)} se={_fmt(se)} "
          f"target={_fmt(target)} z={_fmt(z)} truncation_bound={_fmt(bound)}")
    print("pass" if ok else "FAIL")
    return 0 if ok else 1


def _oracle_rows(seed: int, n_paths: int):
    rows = []
    payoffs = [StateFunction.indicator(0), StateFunction.indicator(2),
               StateFunction.exponential(1.0), StateFunction.constant(1.0)]
    for h in payoffs:
        table = solvers.htilde_table(h)
        target = float(table(np.array(0.0)))
        est, se, _ = solvers.htilde_mc_oracle(h, 0, n_paths, seed)
        rows.append((f"htilde[{h.name}](0)", est, se, target))
    g_cases = [
        ((1.0, 2.0), StateFunction.indicator(0), 1.0, 0),
        ((1.0, 2.0), StateFunction.exponential(1.0), 1.0, 1),
        ((0.5, 1.5, 3.0), StateFunction.constant(2.0), 2.0, 0),
    ]
    for a, h, lam, x in g_cases:
        table = solvers.g_kernel(a, h, lam)
        target = float(table(np.array(float(x))))
        est, se, _ = solvers.g_mc_oracle(a, h, lam, x, n_paths, seed)
        rows.append((f"g[a={a},{h.name},lam={lam}]({x})", est, se, target))
    return rows


def _cmd_oracle(args) -> int:
    rows = _oracle_rows(args.seed, args.mc_paths)
    print("oracle  estimate  se  target  z  pass")
    all_ok = True
    for name, est, se, target in rows:
        z = (est - target) / se if se > 0 else 0.0
        ok = abs(z) <= 3.0
        all_ok = all_ok and ok
        print(f"{name}  {_fmt(est)}  {_fmt(se)}  {_fmt(target)}  {_fmt(z)}  "
              f"{'true' if ok else 'false'}")
    return 0 if all_ok else 1


def _cmd_list_formulas(_args) -> int:
    from .random_time import CdfSpec
    from .solvers import TimeFunction

    cdf = CdfSpec(background=("exponential", 1.0), atoms=())
    models = [
        ("cox_poisson", ModelSpec.cox_poisson(1.0), StateFunction.indicator(0)),
        ("cox_intensity", ModelSpec.cox_intensity((1.0, 2.0), 1.0), StateFunction.indicator(0)),
        ("independent", ModelSpec.independent(cdf, 1.0), TimeFunction.constant(1.0)),
    ]
    header = "formula    " + "  ".join(name for name, _, _ in models)
    print(header)
    for f in rep.FORMULAS:
        cells = []
        for _, model, h in models:
            cells.append("yes" if rep.applicable(f, model, h) else "no ")
        print(f"{f:<10} " + "  ".join(f"{c:<13}" for c in cells))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="prplab",
        description="exact verification of martingale representations under "
                    "progressive filtration enlargement",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="batch-verify a YAML config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--threads", type=int, default=1)
    p_run.add_argument("--paths-sample", type=int, default=None)
    p_run.set_defaults(func=_cmd_run)

    p_ht = sub.add_parser("htilde", help="print the kernel table and MC oracle")
    p_ht.add_argument("--h", default="indicator:0")
    p_ht.add_argument("--x", type=int, default=0)
    p_ht.add_argument("--x-max", type=int, default=10)
    p_ht.add_argument("--mc-paths", type=int, default=100_000)
    p_ht.add_argument("--seed", type=int, default=0)
    p_ht.set_defaults(func=_cmd_htilde)

    p_or = sub.add_parser("oracle", help="run all sampling oracles")
    p_or.add_argument("--mc-paths", type=int, default=100_000)
    p_or.add_argument("--seed", type=int, default=0)
    p_or.set_defaults(func=_cmd_oracle)

    p_lf = sub.add_parser("list-formulas", help="applicability matrix")
    p_lf.set_defaults(func=_cmd_list_formulas)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
