"""Acceptance checks for the estimators, the limit laws and the simulation design.

Each ``criterion_*`` function runs one check at its stated tolerance and
returns a :class:`CriterionResult`. The standard Brownian functional sample
(10^5 draws) is generated once per process and shared.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np

from .dgp import CoefficientPath, ModelConfig, TuningRule
from .estimators import (Dataset, TuningParams, adaptive_lasso_multivariate,
                         adaptive_lasso_univariate, finite_sample_decomposition,
                         kkt_energy_check, ols_fit)
from .limitdist import (MODE_V, MODE_VBAR, MODE_VTILDE, BrownianGrid, LimitParams, MixedDraws,
                        CONSISTENT, limit_selection_prob_conservative,
                        limit_selection_prob_consistent, sample_brownian_functionals,
                        sample_limit_conservative, sample_limit_consistent,
                        sample_limit_consistent_rateT, sample_limit_multivariate)
from .montecarlo import (BY_T, ExperimentPlan, compare, ecdf_ks, run_experiment,
                         selection_frequency, summarize_cell)

SEED = 20_240_601
FUNCTIONAL_DRAWS = 100_000
REPLICATIONS = 10_000


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    values: Dict[str, object] = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        vals = ", ".join(f"{k}={_fmt(v)}" for k, v in self.values.items())
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number}. {self.name}: {vals}"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


@lru_cache(maxsize=None)
def standard_functionals(n_draws: int = FUNCTIONAL_DRAWS, seed: int = SEED):
    """(zeta_vv, Z) draws for k=1 with Omega = I and no endogeneity correction."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    return sample_brownian_functionals(BrownianGrid(), None, rng, n_draws)


@lru_cache(maxsize=None)
def _cells(path_key: tuple, rule_key: tuple, sizes: tuple, reps: int = REPLICATIONS):
    path = CoefficientPath.from_dict(dict(path_key))
    rule = TuningRule.from_dict(dict(rule_key))
    plan = ExperimentPlan(ModelConfig.standard(path), sizes, (rule,), reps, SEED, scaling=BY_T)
    return run_experiment(plan)


def _cell(path: dict, rule: TuningRule, T: int):
    key = tuple(sorted((k, tuple(v) if isinstance(v, list) else v) for k, v in path.items()))
    return _cells(key, tuple(sorted(rule.to_dict().items())), (T,))[(T, rule.label)]


def _timed(fn):
    def wrapper(*args, **kwargs) -> CriterionResult:
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# --- selection probabilities --------------------------------------------------


@_timed
def criterion_1() -> CriterionResult:
    """Conservative cutoff: beta_T = 1/T, lambda = 1."""
    t0 = time.perf_counter()
    fs = standard_functionals()
    p_lim = limit_selection_prob_conservative(1.0, 1.0, fs=fs)
    cell = _cell({"rule": "power_law", "beta": [1.0], "delta": 1.0}, TuningRule.const(1.0), 1000)
    p_fin = selection_frequency(cell)
    runtime = time.perf_counter() - t0
    ok = abs(p_lim - 0.43) <= 0.02 and abs(p_fin - p_lim) <= 0.03 and runtime < 120
    return CriterionResult(1, "conservative selection probability", ok,
                           {"p_limit": p_lim, "p_T1000": p_fin, "runtime_s": runtime})


@_timed
def criterion_2() -> CriterionResult:
    """Consistent cutoff: beta_T = sqrt(lambda_T)/T, lambda_T = T."""
    fs = standard_functionals()
    p_lim = limit_selection_prob_consistent(1.0, fs=fs)
    cell = _cell({"rule": "tuning_coupled", "beta": [1.0]}, TuningRule.linear(), 1000)
    p_fin = selection_frequency(cell)
    ok = abs(p_lim - 0.68) <= 0.02 and abs(p_fin - p_lim) <= 0.03
    return CriterionResult(2, "consistent selection probability", ok,
                           {"p_limit": p_lim, "p_T1000": p_fin})


@_timed
def criterion_3() -> CriterionResult:
    """Oracle property: lambda_T = T^(1/4), beta = 0.1."""
    rule = TuningRule.power(0.25)
    path = {"rule": "fixed", "beta": [0.1]}
    zero, ks = [], []
    for T in (100, 250, 1000):
        cell = _cell(path, rule, T)
        zero.append(selection_frequency(cell))
        ks.append(ecdf_ks(cell.scaled_error_al[:, 0], cell.scaled_error_ols[:, 0]))
    ok = zero[-1] < 0.02 and ks[-1] < 0.05 and ks[0] > ks[1] > ks[2]
    return CriterionResult(3, "oracle property", ok, {"zero_freq": zero, "ks_al_ols": ks})


@_timed
def criterion_4() -> CriterionResult:
    """Random shift: lambda_T = T, beta = 0.1, T = 1000."""
    cell = _cell({"rule": "fixed", "beta": [0.1]}, TuningRule.linear(), 1000)
    diff = float(np.median(cell.scaled_error_al[:, 0]) - np.median(cell.scaled_error_ols[:, 0]))
    zeta, _ = standard_functionals().scalar()
    ref = float(np.median(-1.0 / (2.0 * 0.1 * zeta)))
    rel = abs(diff - ref) / abs(ref)
    ok = diff < 0 and rel <= 0.15
    return CriterionResult(4, "random shift of the median", ok,
                           {"median_diff": diff, "reference": ref, "rel_error": rel})


# --- finite-sample identities and solver --------------------------------------


def _random_walk_instance(rng, n, k, beta):
    X = np.cumsum(rng.standard_normal((n, k)), axis=0)
    y = X @ beta + rng.standard_normal(n)
    return Dataset(y, X)


@_timed
def criterion_5(instances: int = 1000) -> CriterionResult:
    """Decomposition of the scaled error and the quadratic distance bound."""
    rng = np.random.default_rng(np.random.SeedSequence(SEED, spawn_key=(5,)))
    worst_rel, events_ok = 0.0, True
    for _ in range(instances):
        T = int(rng.integers(20, 400))
        beta = float(rng.choice([0.0, 1.0 / T, 0.1, -0.5])) * rng.uniform(0.5, 2.0)
        lam = float(np.exp(rng.uniform(np.log(0.1), np.log(float(T)))))
        dec = finite_sample_decomposition(_random_walk_instance(rng, T, 1, np.array([beta])),
                                          beta, lam)
        for rec in (dec.reconstructed_scaled_error, dec.reconstructed_scaled_error_alt):
            rel = abs(rec - dec.direct_scaled_error) / max(1.0, abs(dec.direct_scaled_error))
            worst_rel = max(worst_rel, rel)
        events_ok &= dec.selected_zero == dec.event_conservative == dec.event_consistent
    bound_hits = 0
    for i in range(instances):
        k = (1, 2, 5)[i % 3]
        n = int(rng.integers(3 * k + 10, 300))
        beta = rng.choice([0.0, 0.01, 0.5], size=k)
        data = _random_walk_instance(rng, n, k, beta)
        tuning = TuningParams(float(np.exp(rng.uniform(np.log(0.1), np.log(float(n))))))
        fit = adaptive_lasso_multivariate(data, tuning, tol=1e-9)
        lhs, rhs = kkt_energy_check(data, fit, tuning)
        bound_hits += lhs <= rhs * (1 + 1e-9)
    ok = worst_rel <= 1e-10 and events_ok and bound_hits == instances
    return CriterionResult(5, "finite-sample identities", ok,
                           {"max_rel_error": worst_rel, "events_agree": events_ok,
                            "bound_holds": f"{bound_hits}/{instances}"})


def _probe_objective(data: Dataset, lam: float, w: np.ndarray, B: np.ndarray) -> np.ndarray:
    G, c = data.X.T @ data.X, data.X.T @ data.y
    quad = np.einsum("ni,ij,nj->n", B, G, B)
    return data.y @ data.y - 2.0 * B @ c + quad + lam * np.abs(B) @ w


@_timed
def criterion_6(instances: int = 1000, probes: int = 1_000_000) -> CriterionResult:
    """Coordinate descent: KKT residual, agreement with the closed form, random probes."""
    rng = np.random.default_rng(np.random.SeedSequence(SEED, spawn_key=(6,)))
    worst_kkt, worst_gap = 0.0, 0.0
    for i in range(instances):
        k = (1, 2, 5)[i % 3]
        n = int(rng.integers(3 * k + 10, 300))
        beta = rng.choice([0.0, 0.01, 0.5], size=k)
        data = _random_walk_instance(rng, n, k, beta)
        lam = float(np.exp(rng.uniform(np.log(0.1), np.log(float(n)))))
        fit = adaptive_lasso_multivariate(data, TuningParams(lam), tol=1e-9)
        worst_kkt = max(worst_kkt, fit.kkt_residual)
        if k == 1:
            closed = adaptive_lasso_univariate(data, lam)
            worst_gap = max(worst_gap, float(abs(closed.beta_al[0] - fit.beta_al[0])))
    # probe instance
    data = _random_walk_instance(rng, 100, 3, np.array([0.5, 0.0, 0.02]))
    lam = 40.0
    fit = adaptive_lasso_multivariate(data, TuningParams(lam), tol=1e-12)
    w = 1.0 / np.abs(fit.beta_ols)
    f_star = float(_probe_objective(data, lam, w, fit.beta_al[None, :])[0])
    spread = np.abs(fit.beta_ols) + 1e-3
    best = math.inf
    for lo in range(0, probes, 100_000):
        m = min(100_000, probes - lo)
        scales = 10.0 ** rng.uniform(-6, 0, size=(m, 1))
        B = fit.beta_al + scales * spread * rng.standard_normal((m, 3))
        B[rng.random((m, 3)) < 0.3] = 0.0  # probe the kinks as well
        best = min(best, float(_probe_objective(data, lam, w, B).min()))
    probe_ok = f_star <= best + 1e-9 * abs(f_star)
    ok = worst_kkt <= 1e-8 and worst_gap <= 1e-8 and probe_ok
    return CriterionResult(6, "solver correctness", ok,
                           {"max_kkt": worst_kkt, "max_closed_form_gap": worst_gap,
                            "objective": f_star, "best_probe": best})


# --- limit laws ---------------------------------------------------------------


def _pair_ks(a: MixedDraws, b) -> float:
    return max(ecdf_ks(a.value, b.value), abs(a.atom_prob - b.atom_prob))


def _argmin_draws(mode, params, fs) -> MixedDraws:
    out = sample_limit_multivariate(mode, params, fs)
    return MixedDraws(out.zero[:, 0], out.value[:, 0])


@_timed
def criterion_7(draws: int = 10_000) -> CriterionResult:
    """Multivariate argmin samplers against the univariate limits (k=1, shared draws)."""
    fs = standard_functionals()[:draws]
    inf = math.inf
    pairs = {}
    for lam0, b0 in ((1.0, 0.0), (1.0, 1.0), (0.5, -2.0)):
        pairs[f"V({lam0:g},{b0:g})"] = (
            _argmin_draws(MODE_V, LimitParams(lam0, b0), fs),
            sample_limit_conservative(lam0, b0, fs))
    for tb in (1.0, 0.5):
        pairs[f"Vtilde({tb:g})"] = (
            _argmin_draws(MODE_VTILDE, LimitParams(inf, tilde_beta0=tb, regime=CONSISTENT), fs),
            sample_limit_consistent(tb, fs))
    for b0, tb, bb in ((inf, inf, 1.0), (inf, inf, inf), (0.0, 0.0, 0.0)):
        params = LimitParams(inf, b0, tb, bb, regime=CONSISTENT)
        pairs[f"Vbar({bb:g})"] = (_argmin_draws(MODE_VBAR, params, fs),
                                  sample_limit_consistent_rateT(b0, tb, bb, fs))
    ks = {name: _pair_ks(a, b) for name, (a, b) in pairs.items()}
    ok = all(v < 0.02 for v in ks.values())
    return CriterionResult(7, "argmin and univariate limits agree", ok,
                           {"max_ks": max(ks.values()), "pairs": len(ks)})


@_timed
def criterion_8() -> CriterionResult:
    """Limit law as a finite-sample approximation (beta_T = 1/T, lambda = 1, T = 250)."""
    cell = _cell({"rule": "power_law", "beta": [1.0], "delta": 1.0}, TuningRule.const(1.0), 250)
    fin = summarize_cell(cell)
    fs = standard_functionals()
    b0T = float(cell.T * cell.beta_T[0])
    lim = compare(fin, sample_limit_conservative(1.0, b0T, fs))
    _, Z = fs.scalar()
    oracle = compare(fin, MixedDraws(np.zeros(Z.size, bool), Z))
    ok = lim.ks_continuous < 0.06 and oracle.ks_continuous > lim.ks_continuous
    return CriterionResult(8, "limit law approximates finite sample", ok,
                           {"ks_limit": lim.ks_continuous, "ks_oracle": oracle.ks_continuous,
                            "p_finite": fin.atom_prob})


@_timed
def criterion_9() -> CriterionResult:
    """First moments of zeta_vv and Z."""
    zeta, Z = standard_functionals().scalar()
    n = zeta.size
    m_zeta, se_zeta = float(zeta.mean()), float(zeta.std(ddof=1) / math.sqrt(n))
    m_z, se_z = float(Z.mean()), float(Z.std(ddof=1) / math.sqrt(n))
    ok = abs(m_zeta - 0.5) <= 3 * se_zeta and abs(m_z) <= 3 * se_z
    return CriterionResult(9, "moments of the functionals", ok,
                           {"mean_zeta": m_zeta, "se_zeta": se_zeta, "mean_Z": m_z, "se_Z": se_z})


CRITERIA: Dict[int, Callable[[], CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9,
}


def run_all(only: Optional[Iterable[int]] = None) -> List[CriterionResult]:
    numbers = sorted(CRITERIA) if only is None else sorted(set(only))
    unknown = [n for n in numbers if n not in CRITERIA]
    if unknown:
        raise ValueError(f"unknown criteria {unknown}")
    return [CRITERIA[n]() for n in numbers]
