"""Command-line interface.

Exit codes: 0 success, 1 failed checks, 2 configuration error,
3 unsupported limit regime, 4 missing input.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import subprocess
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .dgp import ModelConfig, simulate
from .errors import (ConfigurationError, ConvergenceError, EstimationError,
                     LengthError, UnsupportedRegimeError)
from .estimators import (Dataset, TuningParams, adaptive_lasso_multivariate,
                         adaptive_lasso_univariate)
from .extreal import as_extended, to_json
from .limitdist import (CONSERVATIVE, CONSISTENT, MODE_V, MODE_VBAR, MODE_VTILDE, BrownianGrid,
                        Escape, LimitParams, binomial_se, sample_brownian_functionals,
                        sample_limit_conservative, sample_limit_consistent,
                        sample_limit_consistent_rateT, sample_limit_multivariate,
                        sample_ou_functionals)
from .montecarlo import (CellResult, ExperimentPlan, compare, ecdf_ks, matched_limit,
                         run_experiment, summarize_cell, summarize_draws, write_summaries)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_REGIME, EXIT_MISSING = 0, 1, 2, 3, 4

LIMIT_MODES = ("conservative", "consistent", "consistent_rateT", MODE_V, MODE_VTILDE, MODE_VBAR)


class MissingInput(Exception):
    pass


def _version() -> str:
    try:
        desc = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True,
                              text=True, cwd=Path(__file__).parent, timeout=5)
        if desc.returncode == 0 and desc.stdout.strip():
            return f"{__version__}+{desc.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except FileNotFoundError:
        raise MissingInput(f"config file {path} not found") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from None
    if not isinstance(cfg, dict):
        raise ConfigurationError(f"{path}: top level must be a JSON object")
    return cfg


def _override(cfg: dict, args, names) -> dict:
    cfg = dict(cfg)
    for name in names:
        val = getattr(args, name, None)
        if val is not None:
            cfg[name] = val
    return cfg


def _write_manifest(out: Path, command: str, cfg: dict, seed, outputs: List[Path], t0: float):
    manifest = {
        "command": command,
        "config": cfg,
        "seed": seed,
        "version": _version(),
        "wall_clock_s": round(time.perf_counter() - t0, 3),
        "outputs": [p.name for p in outputs],
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)


# --- simulate -----------------------------------------------------------------


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    cfg = _override(_load_config(args.config), args, ("seed", "replications"))
    plan = ExperimentPlan.from_dict(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = run_experiment(plan, args.workers)
    outputs = []
    for cell in results.values():
        path = out / f"records_{cell.label}.csv"
        cell.write_csv(path)
        outputs.append(path)
    summaries = out / "summaries.json"
    write_summaries(results, summaries)
    outputs.append(summaries)
    _write_manifest(out, "simulate", plan.to_dict(), plan.seed, outputs, t0)
    for cell in results.values():
        freq = np.mean(~cell.active, axis=0)
        print(f"{cell.label}: zero frequency {np.array2string(freq, precision=4)}")
    return EXIT_OK


# --- limit --------------------------------------------------------------------


def _functionals(cfg: dict, k: int, rng):
    omega = cfg.get("omega", np.eye(1 + k).tolist())
    grid = BrownianGrid(int(cfg.get("steps", 10_000)), omega)
    if grid.k != k:
        raise ConfigurationError(f"omega has dimension {grid.dim}, expected {1 + k}")
    draws = int(cfg.get("draws", 10_000))
    if draws < 1:
        raise ConfigurationError("draws must be >= 1")
    if cfg.get("c") is not None:
        return sample_ou_functionals(grid, cfg["c"], cfg.get("delta_vu"), rng, draws)
    return sample_brownian_functionals(grid, cfg.get("delta_vu"), rng, draws)


def _vec(cfg, name, k):
    if name not in cfg:
        return None
    val = cfg[name]
    vals = val if isinstance(val, list) else [val]
    if len(vals) != k:
        raise ConfigurationError(f"{name} must have {k} entries")
    return [as_extended(v) for v in vals]


def _limit_draws(cfg: dict, fs):
    """Dispatch by mode; returns (value (n,k), zero (n,k)) or an Escape."""
    mode = cfg.get("mode")
    if mode not in LIMIT_MODES:
        raise ConfigurationError(f"mode must be one of {', '.join(LIMIT_MODES)}; got {mode!r}")
    k = fs.k
    lam0 = as_extended(cfg.get("lambda0", 0.0 if mode in ("conservative", MODE_V) else math.inf))
    b0, tb, bb = (_vec(cfg, n, k) for n in ("beta0", "tilde_beta0", "bar_beta0"))
    if mode in ("conservative", "consistent", "consistent_rateT"):
        if k != 1:
            raise ConfigurationError(f"mode {mode} is univariate; use V, Vtilde or Vbar for k > 1")
        try:
            if mode == "conservative":
                draws = sample_limit_conservative(lam0, b0[0], fs)
            elif mode == "consistent":
                draws = sample_limit_consistent(tb[0], fs)
            else:
                draws = sample_limit_consistent_rateT(b0[0], tb[0], bb[0], fs)
        except TypeError:
            raise ConfigurationError(f"mode {mode} is missing a required coefficient limit") from None
        if isinstance(draws, Escape):
            return draws
        return draws.value[:, None], draws.atom[:, None]
    regime = CONSERVATIVE if mode == MODE_V else CONSISTENT
    params = LimitParams(lam0, b0, tb, bb, regime)
    out = sample_limit_multivariate(mode, params, fs)
    return out.value, out.zero


def cmd_limit(args) -> int:
    t0 = time.perf_counter()
    cfg = _override(_load_config(args.config), args, ("seed", "draws"))
    seed = int(cfg.get("seed", 0))
    k = int(cfg.get("k", 1))
    rng = np.random.default_rng(seed)
    fs = _functionals(cfg, k, rng)
    res = _limit_draws(cfg, fs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"mode": cfg["mode"], "k": k, "draws": len(fs)}
    mode = cfg["mode"]
    summary["ols_equivalent"] = (mode in ("conservative", MODE_V)
                                 and as_extended(cfg.get("lambda0", 0.0)) == 0)
    draws_path = out / "limit_draws.csv"
    if isinstance(res, Escape):
        summary["escape"] = to_json(res.direction)
        summary["selection_prob"] = [0.0]
        summary["selection_prob_se"] = [0.0]
        with open(draws_path, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow(["draw_id", "atom", "value1"])
    else:
        value, zero = res
        p = zero.mean(axis=0)
        summary["selection_prob"] = p.tolist()
        summary["selection_prob_se"] = [binomial_se(float(q), len(fs)) for q in p]
        with open(draws_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["draw_id", "atom"] + [f"value{j + 1}" for j in range(k)])
            for i in range(value.shape[0]):
                w.writerow([i, "".join("1" if z else "0" for z in zero[i])]
                           + [repr(float(v)) for v in value[i]])
    summary_path = out / "limit_summary.json"
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=1)
    _write_manifest(out, "limit", cfg, seed, [draws_path, summary_path], t0)
    for j, (q, se) in enumerate(zip(summary["selection_prob"], summary["selection_prob_se"])):
        print(f"P(beta_AL,{j + 1} = 0) = {q:.4f} (s.e. {se:.4f})")
    if summary.get("escape"):
        print(f"all mass escapes to {summary['escape']}")
    if summary["ols_equivalent"]:
        print("lambda0 = 0: the limit coincides with the OLS limit")
    return EXIT_OK


# --- figure -------------------------------------------------------------------


def cmd_figure(args) -> int:
    from .plotting import plot_cell

    run = Path(args.run)
    manifest = run / "manifest.json"
    if not manifest.is_file():
        raise MissingInput(f"{manifest} not found (is the simulate run complete?)")
    with open(manifest) as fh:
        plan = ExperimentPlan.from_dict(json.load(fh)["config"])
    rule = next((r for r in plan.tuning_rules if r.label == args.rule), None)
    if rule is None or args.T not in plan.sample_sizes:
        raise ConfigurationError(
            f"cell T={args.T}, rule={args.rule} is not in the run; rules: "
            f"{', '.join(r.label for r in plan.tuning_rules)}, T: {list(plan.sample_sizes)}")
    records = run / f"records_T{args.T}_lam{rule.label}.csv"
    if not records.is_file():
        raise MissingInput(f"{records} not found")
    lam = rule(args.T)
    cell = CellResult.read_csv(records, args.T, rule, plan.model.path.value(args.T, lam),
                               plan.scaling_for(rule))
    j = args.coord
    if not 0 <= j < cell.beta_al.shape[1]:
        raise ConfigurationError(f"coord must lie in [0, {cell.beta_al.shape[1] - 1}]")
    al, ols = summarize_cell(cell, j, "al"), summarize_cell(cell, j, "ols")
    side = {"T": cell.T, "rule": rule.label, "lambda": lam, "coord": j,
            "atom_prob": al.atom_prob, "atom_location": to_json(al.atom_location),
            "ks_al_ols": ecdf_ks(al.continuous_sample, ols.continuous_sample)
            if al.continuous_sample.size else None}
    limit = None
    if args.limit_draws > 0 and plan.model.k == 1 and plan.model.dynamics.kind == "unit_root":
        rng = np.random.default_rng(plan.seed)
        fs = sample_brownian_functionals(BrownianGrid(), None, rng, args.limit_draws)
        draws = matched_limit(cell, plan.model.path, fs, j)
        if isinstance(draws, Escape):
            side["limit_escape"] = to_json(draws.direction)
        else:
            limit = summarize_draws(draws)
            side["limit_comparison"] = compare(al, draws).to_dict()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    title = f"T={cell.T}, lambda={rule.label}"
    plot_cell(out, al, ols, limit, title=title, clip=args.clip)
    with open(out.with_suffix(".json"), "w") as fh:
        json.dump(side, fh, indent=1)
    print(f"wrote {out}")
    return EXIT_OK


# --- check / fit / generate ---------------------------------------------------


def cmd_check(args) -> int:
    from .acceptance import run_all

    only = [int(s) for s in args.only.split(",")] if args.only else None
    results = run_all(only)
    for r in results:
        print(r.line())
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else EXIT_FAIL


def _read_dataset(path: str) -> Dataset:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except FileNotFoundError:
        raise MissingInput(f"data file {path} not found") from None
    if not rows:
        raise ConfigurationError(f"{path} has no rows")
    xs = sorted((c for c in rows[0] if c.startswith("x") and c[1:].isdigit()), key=lambda c: int(c[1:]))
    if "y" not in rows[0] or not xs:
        raise ConfigurationError(f"{path} needs columns y and x1..xk")
    rows = [r for r in rows if r["y"] != ""]
    try:
        y = np.array([float(r["y"]) for r in rows])
        X = np.array([[float(r[c]) for c in xs] for r in rows])
    except ValueError as exc:
        raise ConfigurationError(f"{path}: non-numeric entry ({exc})") from None
    return Dataset(y, X)


def cmd_fit(args) -> int:
    data = _read_dataset(args.data)
    if data.k == 1 and args.gamma == 1.0:
        fit = adaptive_lasso_univariate(data, args.lam)
    else:
        fit = adaptive_lasso_multivariate(data, TuningParams(args.lam, args.gamma), tol=args.tol)
    text = json.dumps(fit.to_dict(), indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_generate(args) -> int:
    cfg = _load_config(args.config)
    model = ModelConfig.from_dict(cfg.get("model", cfg))
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    lam = args.lam if args.lam is not None else 1.0
    path = simulate(model, args.T, np.random.default_rng(seed), lam=lam)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        path.to_csv(fh)
    print(f"wrote {out}")
    return EXIT_OK


# --- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="alcoint",
                                description="Adaptive LASSO in cointegrating regressions: "
                                            "simulation, limit laws and figures.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a Monte Carlo experiment plan")
    s.add_argument("--config", required=True, help="experiment plan (JSON)")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int)
    s.add_argument("--replications", type=int)
    s.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: $ALCOINT_WORKERS or 1)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("limit", help="sample a limiting distribution")
    s.add_argument("--config", required=True, help="limit specification (JSON)")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int)
    s.add_argument("--draws", type=int)
    s.set_defaults(func=cmd_limit)

    s = sub.add_parser("figure", help="render one cell of a simulate run as SVG")
    s.add_argument("--run", required=True, help="directory written by 'simulate'")
    s.add_argument("--T", type=int, required=True)
    s.add_argument("--rule", required=True, help="tuning rule label, e.g. const1, pow0.25, linear")
    s.add_argument("--coord", type=int, default=0)
    s.add_argument("--out", required=True, help="SVG path; a .json sidecar is written next to it")
    s.add_argument("--limit-draws", type=int, default=10_000,
                   help="draws for the matched limit law (0 disables it)")
    s.add_argument("--clip", type=float, default=4.0)
    s.set_defaults(func=cmd_figure)

    s = sub.add_parser("check", help="run the acceptance criteria")
    s.add_argument("--only", help="comma-separated criterion numbers")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("fit", help="fit OLS and adaptive LASSO to a CSV dataset")
    s.add_argument("--data", required=True, help="CSV with columns y, x1..xk")
    s.add_argument("--lam", type=float, required=True)
    s.add_argument("--gamma", type=float, default=1.0)
    s.add_argument("--tol", type=float, default=None)
    s.add_argument("--out")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("generate", help="simulate one sample path to CSV")
    s.add_argument("--config", required=True, help="model config, or a plan containing 'model'")
    s.add_argument("--T", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--lam", type=float, help="lambda_T used by tuning-coupled paths")
    s.set_defaults(func=cmd_generate)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UnsupportedRegimeError as exc:
        print(f"error: unsupported regime: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except MissingInput as exc:
        print(f"error: missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ConfigurationError, LengthError, ValueError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, EstimationError) as exc:
        print(f"error: estimation failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
