"""OLS and adaptive LASSO estimation.

The adaptive LASSO minimizes ``sum (y_t - x_t'b)^2 + lam * sum_j w_j |b_j|``
with ``w_j = |b_ols_j|^-gamma``. For one regressor the minimizer has a closed
form; for several we use cyclic coordinate descent with an active-set
polishing step, stopping on the KKT residual.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import ConvergenceError, EstimationError


@dataclass(frozen=True)
class Dataset:
    y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"y has {y.shape[0]} rows but X has {X.shape[0]}")
        if not X.shape[0] > X.shape[1] >= 1:
            raise ValueError(f"need n > k >= 1, got n={X.shape[0]}, k={X.shape[1]}")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class TuningParams:
    lam: float
    gamma: float = 1.0
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")
        if self.weights is not None:
            w = np.atleast_1d(np.asarray(self.weights, dtype=float))
            if np.any(~(w > 0)) or np.any(np.isnan(w)):
                raise ValueError("penalty weights must be positive")
            object.__setattr__(self, "weights", w)

    def resolve_weights(self, beta_ols: np.ndarray) -> np.ndarray:
        """Penalty weights; an exact-zero OLS coordinate gets weight +inf."""
        if self.weights is not None:
            if self.weights.shape != beta_ols.shape:
                raise ValueError("weights length does not match number of regressors")
            return self.weights
        with np.errstate(divide="ignore"):
            return np.abs(beta_ols) ** (-self.gamma)


@dataclass
class FitResult:
    beta_ols: np.ndarray
    beta_al: np.ndarray
    active_set: np.ndarray
    lambda_std: Optional[float]
    kkt_residual: float
    iterations: int

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("beta_ols", "beta_al", "active_set"):
            d[key] = np.asarray(d[key]).tolist()
        return d


def _gram(data: Dataset):
    return data.X.T @ data.X, data.X.T @ data.y


def ols_fit(data: Dataset):
    """Least squares coefficients and residuals."""
    G, c = _gram(data)
    if np.linalg.cond(G) > 1.0 / np.finfo(float).eps:
        raise EstimationError("X'X is singular")
    beta = np.linalg.solve(G, c)
    return beta, data.y - data.X @ beta


def penalized_objective(data: Dataset, b, tuning: TuningParams, weights=None) -> float:
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if weights is None:
        weights = tuning.resolve_weights(ols_fit(data)[0])
    resid = data.y - data.X @ b
    nz = b != 0
    return float(resid @ resid + tuning.lam * np.sum(weights[nz] * np.abs(b[nz])))


def _kkt(grad: np.ndarray, beta: np.ndarray, active: np.ndarray, thresholds: np.ndarray) -> float:
    """Max subgradient violation given grad = 2 X'(y - X beta) and thresholds lam*w."""
    viol = np.where(
        active,
        np.abs(grad - thresholds * np.sign(beta)),
        np.maximum(0.0, np.abs(grad) - thresholds),
    )
    return float(np.max(viol)) if viol.size else 0.0


def kkt_residual(data: Dataset, fit: FitResult, tuning: TuningParams) -> float:
    """KKT violation of ``fit.beta_al``, divided by n."""
    w = tuning.resolve_weights(fit.beta_ols)
    grad = 2.0 * data.X.T @ (data.y - data.X @ fit.beta_al)
    with np.errstate(invalid="ignore"):
        return _kkt(grad, fit.beta_al, fit.active_set, tuning.lam * w) / data.n


def kkt_energy_check(data: Dataset, fit: FitResult, tuning: TuningParams):
    """Quadratic distance to OLS and its bound k*lam/2 (valid for gamma=1, OLS weights)."""
    d = fit.beta_al - fit.beta_ols
    lhs = float(d @ (data.X.T @ data.X) @ d)
    return lhs, data.k * tuning.lam / 2.0


def adaptive_lasso_univariate(data: Dataset, lam: float) -> FitResult:
    """Closed-form adaptive LASSO for one regressor (gamma=1, OLS weights)."""
    if data.k != 1:
        raise ValueError(f"closed form needs k=1, got k={data.k}")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    x = data.X[:, 0]
    sxx = float(x @ x)
    bhat = float(x @ data.y) / sxx
    lam_std = 0.5 * lam / sxx
    if bhat == 0.0:
        warnings.warn("OLS coordinate is exactly zero; penalty weight is infinite", RuntimeWarning)
        active = False
    else:
        # boundary |bhat| == sqrt(lam_std) belongs to the zero branch
        active = abs(bhat) > math.sqrt(lam_std)
    beta_al = bhat - lam_std / bhat if active else 0.0
    fit = FitResult(np.array([bhat]), np.array([beta_al]), np.array([active]), lam_std, 0.0, 0)
    fit.kkt_residual = kkt_residual(data, fit, TuningParams(lam))
    return fit


def _soft(r: float, thr: float):
    if r > thr:
        return r - thr, True
    if r < -thr:
        return r + thr, True
    return 0.0, False


def _polish(G, c, thr, beta, active):
    """Solve the stationarity equations on the current active set.

    Returns the candidate (beta, active) if it keeps the active signs,
    else None.
    """
    idx = np.flatnonzero(active)
    cand = np.zeros_like(beta)
    if idx.size:
        s = np.sign(beta[idx])
        try:
            cand[idx] = np.linalg.solve(G[np.ix_(idx, idx)], c[idx] - 0.5 * thr[idx] * s)
        except np.linalg.LinAlgError:
            return None
        if np.any(np.sign(cand[idx]) != s):
            return None
    return cand, active.copy()


def adaptive_lasso_multivariate(data: Dataset, tuning: TuningParams,
                                tol: Optional[float] = None, max_iter: int = 100_000) -> FitResult:
    """Adaptive LASSO by cyclic coordinate descent (ascending index order).

    Every sweep is followed by an exact solve on the current active set;
    the fit is returned as soon as the KKT residual (scaled by 1/n) is at
    most ``tol``. Default ``tol`` is ``1e-10 * sum(y**2)``.
    """
    if tol is None:
        tol = 1e-10 * float(data.y @ data.y)
    if not tol > 0:
        raise ValueError("tol must be positive")
    beta_ols, _ = ols_fit(data)
    w = tuning.resolve_weights(beta_ols)
    pinned = np.isinf(w)
    if pinned.any():
        warnings.warn(f"coordinates {np.flatnonzero(pinned).tolist()} have infinite penalty "
                      "weight and are fixed at zero", RuntimeWarning)
    G, c = _gram(data)
    thr = tuning.lam * w
    k, n = data.k, data.n

    def residual(b, act):
        grad = 2.0 * data.X.T @ (data.y - data.X @ b)
        with np.errstate(invalid="ignore"):
            return _kkt(grad, b, act, thr) / n

    beta = np.where(pinned, 0.0, beta_ols)
    active = ~pinned
    res = residual(beta, active)
    it = 0
    while res > tol:
        if it >= max_iter:
            raise ConvergenceError(f"coordinate descent did not reach tol={tol:g} in {max_iter} sweeps",
                                   last_iterate=beta.copy(), residual=res)
        it += 1
        for j in range(k):
            if pinned[j]:
                continue
            r = c[j] - G[j] @ beta + G[j, j] * beta[j]
            val, on = _soft(r, 0.5 * thr[j])
            beta[j] = val / G[j, j] if on else 0.0
            active[j] = on
        res = residual(beta, active)
        if res > tol:
            cand = _polish(G, c, thr, beta, active)
            if cand is not None:
                cres = residual(*cand)
                if cres < res:
                    beta, active = cand
                    res = cres
    lam_std = 0.5 * tuning.lam / G[0, 0] if k == 1 else None
    return FitResult(beta_ols, beta, active, lam_std, res, it)


@dataclass(frozen=True)
class FiniteSampleDecomposition:
    Z_T: float
    zeta_vvT: float
    beta0T: float
    tilde_beta0T: float
    bar_beta0T: float
    selected_zero: bool
    event_conservative: bool
    event_consistent: bool
    reconstructed_scaled_error: float
    reconstructed_scaled_error_alt: float
    direct_scaled_error: float


def finite_sample_decomposition(data: Dataset, beta_true: float, lam: float,
                                T: Optional[int] = None) -> FiniteSampleDecomposition:
    """Finite-sample representation of T(beta_AL - beta_T) for one regressor.

    Both decompositions (in terms of beta_{0,T} and of bar beta_{0,T}) are
    evaluated together with the two forms of the zero-selection event.
    ``T`` defaults to the number of observations.
    """
    if data.k != 1:
        raise ValueError("decomposition is defined for k=1")
    T = data.n if T is None else T
    fit = adaptive_lasso_univariate(data, lam)
    x = data.X[:, 0]
    Z = T * (fit.beta_ols[0] - beta_true)
    zeta = float(x @ x) / T**2
    b0 = T * beta_true
    tb0 = b0 / math.sqrt(lam)
    bb0 = b0 / lam
    inactive = not fit.active_set[0]
    if inactive:
        rec = rec_alt = -b0
    else:
        rec = Z - lam / (2.0 * zeta) / (Z + b0)
        rec_alt = Z - 1.0 / (2.0 * zeta) / (Z / lam + bb0)
    ev1 = math.sqrt(zeta) * abs(Z + b0) <= math.sqrt(lam / 2.0)
    denom = abs(Z / math.sqrt(lam) + tb0)
    ev2 = math.sqrt(zeta) <= (math.inf if denom == 0 else 1.0 / (math.sqrt(2.0) * denom))
    return FiniteSampleDecomposition(
        Z, zeta, b0, tb0, bb0, inactive, ev1, ev2, rec, rec_alt,
        T * (fit.beta_al[0] - beta_true),
    )
