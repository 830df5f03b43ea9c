"""Monte Carlo study of finite-sample adaptive LASSO distributions.

Each replication draws its data from its own seed, derived from the plan
seed, the sample size and the replication index, so results do not depend
on execution order or on how replications are split across workers. The
innovations for a given (T, replication) are shared across tuning rules.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid

from .dgp import ModelConfig, TuningRule, simulate
from .errors import ConfigurationError, ConvergenceError
from .estimators import Dataset, TuningParams, adaptive_lasso_multivariate, adaptive_lasso_univariate
from .extreal import to_json
from .limitdist import MixedDraws

BY_T = "T"
BY_T_OVER_SQRT_LAMBDA = "T_over_sqrt_lambda"
WORKERS_ENV = "ALCOINT_WORKERS"


@dataclass(frozen=True)
class ExperimentPlan:
    model: ModelConfig
    sample_sizes: Tuple[int, ...]
    tuning_rules: Tuple[TuningRule, ...]
    replications: int
    seed: int
    scaling: str = "auto"

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigurationError("replications must be >= 1")
        if not self.sample_sizes or min(self.sample_sizes) <= self.model.k + 1:
            raise ConfigurationError("every sample size must exceed k+1")
        if not self.tuning_rules:
            raise ConfigurationError("need at least one tuning rule")
        if self.scaling not in ("auto", BY_T, BY_T_OVER_SQRT_LAMBDA):
            raise ConfigurationError(f"unknown scaling {self.scaling!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "sample_sizes", tuple(int(t) for t in self.sample_sizes))
        object.__setattr__(self, "tuning_rules", tuple(self.tuning_rules))

    def scaling_for(self, rule: TuningRule) -> str:
        if self.scaling != "auto":
            return self.scaling
        return BY_T if rule.conservative else BY_T_OVER_SQRT_LAMBDA

    def cells(self):
        for T in self.sample_sizes:
            for rule in self.tuning_rules:
                yield T, rule

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "sample_sizes": list(self.sample_sizes),
            "tuning_rules": [r.to_dict() for r in self.tuning_rules],
            "replications": self.replications,
            "seed": self.seed,
            "scaling": self.scaling,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        try:
            rules = d.get("tuning_rules")
            if rules is None:
                rules = [d["tuning_rule"]]
            return cls(
                ModelConfig.from_dict(d["model"]),
                tuple(d["sample_sizes"]),
                tuple(TuningRule.from_dict(r) for r in rules),
                int(d["replications"]),
                int(d["seed"]),
                d.get("scaling", "auto"),
            )
        except KeyError as exc:
            raise ConfigurationError(f"plan missing field {exc.args[0]!r}") from None


def replication_rng(seed: int, T: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(T, rep)))


@dataclass(frozen=True)
class ReplicationRecord:
    rep_id: int
    beta_ols: np.ndarray
    beta_al: np.ndarray
    active_set: np.ndarray
    scaled_error_ols: np.ndarray
    scaled_error_al: np.ndarray


@dataclass
class CellResult:
    """All replications of one (T, tuning rule) cell, stored column-wise."""

    T: int
    rule: TuningRule
    lam: float
    beta_T: np.ndarray
    scaling: str
    beta_ols: np.ndarray
    beta_al: np.ndarray
    active: np.ndarray

    @property
    def label(self) -> str:
        return f"T{self.T}_lam{self.rule.label}"

    @property
    def scale(self) -> float:
        return self.T if self.scaling == BY_T else self.T / math.sqrt(self.lam)

    @property
    def scaled_error_ols(self) -> np.ndarray:
        return self.scale * (self.beta_ols - self.beta_T)

    @property
    def scaled_error_al(self) -> np.ndarray:
        return self.scale * (self.beta_al - self.beta_T)

    @property
    def atom_location(self) -> np.ndarray:
        """Scaled error of an exact-zero estimate: -beta_{0,T} or -tilde beta_{0,T}."""
        return -self.scale * self.beta_T

    def __len__(self):
        return self.beta_al.shape[0]

    def records(self) -> Iterator[ReplicationRecord]:
        se_o, se_a = self.scaled_error_ols, self.scaled_error_al
        for r in range(len(self)):
            yield ReplicationRecord(r, self.beta_ols[r], self.beta_al[r], self.active[r],
                                    se_o[r], se_a[r])

    def write_csv(self, path) -> None:
        k = self.beta_al.shape[1]
        cols = ["rep_id"]
        for name in ("beta_ols", "beta_al", "active", "scaled_error_ols", "scaled_error_al"):
            cols += [f"{name}{j + 1}" for j in range(k)]
        se_o, se_a = self.scaled_error_ols, self.scaled_error_al
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in range(len(self)):
                row = [r]
                row += [repr(float(v)) for v in self.beta_ols[r]]
                row += [repr(float(v)) for v in self.beta_al[r]]
                row += [int(v) for v in self.active[r]]
                row += [repr(float(v)) for v in se_o[r]]
                row += [repr(float(v)) for v in se_a[r]]
                w.writerow(row)

    @classmethod
    def read_csv(cls, path, T: int, rule: TuningRule, beta_T, scaling: str) -> "CellResult":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path} has no records")
        k = sum(1 for c in rows[0] if c.startswith("beta_al"))

        def block(prefix, conv):
            return np.array([[conv(r[f"{prefix}{j + 1}"]) for j in range(k)] for r in rows])

        return cls(T, rule, rule(T), np.atleast_1d(np.asarray(beta_T, float)), scaling,
                   block("beta_ols", float), block("beta_al", float),
                   block("active", lambda s: bool(int(s))))


def _fit_block(args):
    model, T, rules, seed, reps = args
    k = model.k
    lams = [rule(T) for rule in rules]
    betas = [model.path.value(T, lam) for lam in lams]
    out = [(np.empty((len(reps), k)), np.empty((len(reps), k)), np.empty((len(reps), k), bool))
           for _ in rules]
    for i, r in enumerate(reps):
        rng = replication_rng(seed, T, r)
        path = simulate(model, T, rng, beta=np.zeros(k))
        noise = path.y  # response with beta = 0
        for c, (lam, beta) in enumerate(zip(lams, betas)):
            data = Dataset(noise + path.X @ beta, path.X)
            try:
                if k == 1:
                    fit = adaptive_lasso_univariate(data, lam)
                else:
                    fit = adaptive_lasso_multivariate(data, TuningParams(lam))
            except ConvergenceError as exc:
                raise ConvergenceError(f"T={T}, rule={rules[c].label}, rep={r}: {exc}",
                                       exc.last_iterate, exc.residual) from exc
            out[c][0][i] = fit.beta_ols
            out[c][1][i] = fit.beta_al
            out[c][2][i] = fit.active_set
    return out


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise ConfigurationError(f"{WORKERS_ENV} must be an integer") from None


def run_experiment(plan: ExperimentPlan, workers: Optional[int] = None) -> Dict[Tuple[int, str], CellResult]:
    """Simulate every (T, tuning rule) cell; returns cells keyed by (T, rule label)."""
    workers = default_workers() if workers is None else workers
    results = {}
    for T in plan.sample_sizes:
        reps = list(range(plan.replications))
        n_blocks = max(1, min(workers * 4, len(reps))) if workers > 1 else 1
        blocks = [reps[i::n_blocks] for i in range(n_blocks)]
        jobs = [(plan.model, T, plan.tuning_rules, plan.seed, b) for b in blocks]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(_fit_block, jobs))
        else:
            parts = [_fit_block(j) for j in jobs]
        order = np.argsort(np.concatenate([np.asarray(b) for b in blocks]), kind="stable")
        for c, rule in enumerate(plan.tuning_rules):
            lam = rule(T)
            bo, ba, act = (np.concatenate([p[c][i] for p in parts])[order] for i in range(3))
            results[(T, rule.label)] = CellResult(T, rule, lam, plan.model.path.value(T, lam),
                                                  plan.scaling_for(rule), bo, ba, act)
    return results


# --- summaries --------------------------------------------------------------


@dataclass
class KDECurve:
    x: np.ndarray
    density: np.ndarray
    bandwidth: float

    def mass(self) -> float:
        return float(trapezoid(self.density, self.x))


def silverman_bandwidth(sample: np.ndarray) -> float:
    sample = np.asarray(sample, float)
    n = sample.size
    sd = float(np.std(sample, ddof=1))
    q75, q25 = np.percentile(sample, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34)
    if spread <= 0:
        spread = sd
    if spread <= 0:
        spread = 1.0
    return 0.9 * spread * n ** (-0.2)


def kde(sample, bandwidth: Optional[float] = None, grid_points: int = 512) -> KDECurve:
    """Gaussian kernel density on an even grid spanning the sample range +- 3 bandwidths."""
    sample = np.asarray(sample, float).ravel()
    if sample.size < 2:
        raise ValueError("kernel density needs at least two points")
    h = silverman_bandwidth(sample) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    x = np.linspace(sample.min() - 3 * h, sample.max() + 3 * h, grid_points)
    dens = np.zeros(grid_points)
    norm = 1.0 / (sample.size * h * math.sqrt(2 * math.pi))
    for lo in range(0, sample.size, 4096):
        d = (x[:, None] - sample[None, lo:lo + 4096]) / h
        dens += np.exp(-0.5 * d * d).sum(axis=1)
    return KDECurve(x, dens * norm, h)


@dataclass
class MixedDistributionSummary:
    atom_prob: float
    atom_location: float
    continuous_sample: np.ndarray
    kde: Optional[KDECurve]
    bandwidth: Optional[float]

    def to_dict(self) -> dict:
        d = {
            "atom_prob": self.atom_prob,
            "atom_location": to_json(self.atom_location),
            "n_continuous": int(self.continuous_sample.size),
            "bandwidth": self.bandwidth,
        }
        if self.kde is not None:
            d["kde_x"] = self.kde.x.tolist()
            d["kde_density"] = self.kde.density.tolist()
            d["kde_mass"] = self.kde.mass()
        return d


def summarize_mixed(values, active, atom_location: float,
                    bandwidth: Optional[float] = None) -> MixedDistributionSummary:
    """Atom probability from the active flags plus a (1-p)-scaled KDE of the rest."""
    values = np.asarray(values, float).ravel()
    active = np.asarray(active, bool).ravel()
    p = float(np.mean(~active)) if values.size else 0.0
    cont = values[active]
    if cont.size < 2:
        return MixedDistributionSummary(p, atom_location, cont, None, None)
    curve = kde(cont, bandwidth)
    curve = KDECurve(curve.x, curve.density * (1.0 - p), curve.bandwidth)
    return MixedDistributionSummary(p, atom_location, cont, curve, curve.bandwidth)


def summarize_cell(cell: CellResult, coord: int = 0, which: str = "al") -> MixedDistributionSummary:
    if which == "ols":
        vals = cell.scaled_error_ols[:, coord]
        return summarize_mixed(vals, np.ones(len(vals), bool), float(cell.atom_location[coord]))
    return summarize_mixed(cell.scaled_error_al[:, coord], cell.active[:, coord],
                           float(cell.atom_location[coord]))


def summarize_draws(draws: MixedDraws, bandwidth: Optional[float] = None) -> MixedDistributionSummary:
    loc = float(draws.value[draws.atom][0]) if draws.atom.any() else math.nan
    return summarize_mixed(draws.value, ~draws.atom, loc, bandwidth)


def ecdf_ks(sample_a, sample_b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|."""
    a = np.sort(np.asarray(sample_a, float).ravel())
    b = np.sort(np.asarray(sample_b, float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("KS statistic needs two non-empty samples")
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


@dataclass
class ComparisonReport:
    atom_prob_diff: float
    ks_continuous: Optional[float]
    n_finite: int
    n_limit: int

    @property
    def ks_defined(self) -> bool:
        return self.ks_continuous is not None

    def to_dict(self) -> dict:
        return {"atom_prob_diff": self.atom_prob_diff, "ks_continuous": self.ks_continuous,
                "ks_defined": self.ks_defined, "n_finite": self.n_finite, "n_limit": self.n_limit}


def compare(finite: MixedDistributionSummary, limit: MixedDraws) -> ComparisonReport:
    """Atom-probability gap and KS distance between the continuous parts."""
    cont_lim = limit.continuous
    ks = None
    if finite.continuous_sample.size and cont_lim.size:
        ks = ecdf_ks(finite.continuous_sample, cont_lim)
    return ComparisonReport(abs(finite.atom_prob - limit.atom_prob), ks,
                            int(finite.continuous_sample.size), int(cont_lim.size))


def selection_frequency(cell: CellResult, coord: int = 0) -> float:
    """Fraction of replications with coordinate ``coord`` estimated as exactly zero."""
    return float(np.mean(~cell.active[:, coord]))


def write_summaries(results: Dict[Tuple[int, str], CellResult], path) -> None:
    out = []
    for cell in results.values():
        entry = {"T": cell.T, "rule": cell.rule.label, "lambda": cell.lam,
                 "beta_T": cell.beta_T.tolist(), "scaling": cell.scaling, "coords": []}
        for j in range(cell.beta_al.shape[1]):
            entry["coords"].append({
                "selection_frequency": selection_frequency(cell, j),
                "al": summarize_cell(cell, j, "al").to_dict(),
                "ols": summarize_cell(cell, j, "ols").to_dict(),
            })
        out.append(entry)
    with open(path, "w") as fh:
        json.dump(out, fh, indent=1)


def matched_limit(cell: CellResult, path, fs, coord: int = 0):
    """Limit law matching a finite-sample cell, evaluated at the finite-T parameters.

    Conservative rules use the conservative limit at beta_{0,T}; consistent
    rules use the consistent limit at tilde beta_{0,T} when scaled by
    T/sqrt(lambda), or the rate-T limit otherwise (which may be an
    :class:`~alcoint.limitdist.Escape`).
    """
    from .limitdist import (Escape, sample_limit_conservative, sample_limit_consistent,
                            sample_limit_consistent_rateT)

    fin = path.finite_sample_params(cell.T, cell.lam)
    b0T = float(fin.beta0[coord])
    if cell.rule.conservative:
        draws = sample_limit_conservative(cell.lam, b0T, fs)
        if cell.scaling == BY_T_OVER_SQRT_LAMBDA:
            draws = MixedDraws(draws.atom, draws.value / math.sqrt(cell.lam))
        return draws
    if cell.scaling == BY_T_OVER_SQRT_LAMBDA:
        return sample_limit_consistent(float(fin.tilde_beta0[coord]), fs)
    lim = path.limits(cell.rule)
    b0, tb, bb = (float(getattr(lim, n)[coord]) for n in ("beta0", "tilde_beta0", "bar_beta0"))
    if tb == 0:
        return sample_limit_consistent_rateT(b0T, 0.0, 0.0, fs)
    if not math.isinf(tb):
        return Escape(-math.copysign(math.inf, tb))
    bbT = float(fin.bar_beta0[coord])
    return sample_limit_consistent_rateT(math.copysign(math.inf, bbT), math.copysign(math.inf, bbT),
                                         bbT, fs)
