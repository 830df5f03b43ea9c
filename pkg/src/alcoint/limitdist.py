"""Brownian functionals and limiting laws of the adaptive LASSO.

Brownian motions are approximated on an equispaced grid by normalized sums
of i.i.d. standard normals. ``zeta_vv`` is a left-endpoint Riemann sum and
the stochastic integral a left-endpoint (Ito) sum.

All samplers work on batches: a :class:`FunctionalSample` holds ``n`` joint
draws and the limit samplers return ``n`` draws at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigurationError, ConvergenceError, UnsupportedRegimeError
from .extreal import as_extended

CONSERVATIVE = "conservative"
CONSISTENT = "consistent"

# modes of the multivariate argmin sampler
MODE_V = "V"
MODE_VTILDE = "Vtilde"
MODE_VBAR = "Vbar"

FREE, PINNED, WEIGHTED, LINEAR = "free", "pinned", "weighted", "linear"

_CHUNK_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class BrownianGrid:
    """Discretization of ``B = Omega^{1/2} W`` on [0, 1].

    ``omega`` is ordered as the error vector ``[u, v']'``.
    """

    steps: int = 10_000
    omega: np.ndarray = field(default_factory=lambda: np.eye(2))

    def __post_init__(self):
        omega = np.atleast_2d(np.asarray(self.omega, dtype=float))
        if self.steps < 100:
            raise ConfigurationError("grid needs at least 100 steps")
        if omega.shape[0] != omega.shape[1] or omega.shape[0] < 2:
            raise ConfigurationError("omega must be square with dim >= 2")
        if not np.allclose(omega, omega.T, atol=1e-12):
            raise ConfigurationError("omega must be symmetric")
        try:
            np.linalg.cholesky(omega)
        except np.linalg.LinAlgError:
            raise ConfigurationError("omega must be positive definite") from None
        object.__setattr__(self, "omega", omega)

    @property
    def dim(self) -> int:
        return self.omega.shape[0]

    @property
    def k(self) -> int:
        return self.dim - 1

    def factors(self):
        """Split B_u = a'W_v + s W_perp, B_v = L W_v with W_perp independent of W_v."""
        perm = list(range(1, self.dim)) + [0]
        chol = np.linalg.cholesky(self.omega[np.ix_(perm, perm)])
        k = self.k
        return chol[:k, :k], chol[k, :k], chol[k, k]


@dataclass
class FunctionalSample:
    """Joint draws of (zeta_vv, int B_v dB_u + Delta_vu, Z).

    Shapes: ``zeta_vv`` (n, k, k), ``ito_term`` (n, k), ``Z`` (n, k).
    ``c`` is None for the unit-root case, else the local-to-unity vector.
    """

    zeta_vv: np.ndarray
    ito_term: np.ndarray
    Z: np.ndarray
    c: Optional[np.ndarray] = None

    def __len__(self):
        return self.Z.shape[0]

    @property
    def k(self) -> int:
        return self.Z.shape[1]

    @property
    def variant(self) -> str:
        return "unit_root" if self.c is None else "ou"

    def scalar(self):
        """(zeta, Z) as 1-d arrays for k = 1."""
        if self.k != 1:
            raise ValueError("scalar view needs k=1")
        return self.zeta_vv[:, 0, 0], self.Z[:, 0]

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            idx = slice(idx, idx + 1)
        return FunctionalSample(self.zeta_vv[idx], self.ito_term[idx], self.Z[idx], self.c)

    @classmethod
    def concat(cls, parts):
        parts = list(parts)
        return cls(np.concatenate([p.zeta_vv for p in parts]),
                   np.concatenate([p.ito_term for p in parts]),
                   np.concatenate([p.Z for p in parts]), parts[0].c)


@dataclass
class MixedDraws:
    """Draws from a law with an atom: ``atom[i]`` marks the point-mass branch.

    ``value`` holds the draw itself, also on the atom branch (where it equals
    the atom location).
    """

    atom: np.ndarray
    value: np.ndarray

    def __len__(self):
        return self.value.shape[0]

    @property
    def atom_prob(self) -> float:
        return float(np.mean(self.atom)) if len(self) else 0.0

    @property
    def continuous(self) -> np.ndarray:
        return self.value[~self.atom]


@dataclass(frozen=True)
class Escape:
    """The whole mass escapes to ``direction`` (+inf or -inf)."""

    direction: float


@dataclass(frozen=True)
class LimitParams:
    lambda0: float = 0.0
    beta0: Optional[np.ndarray] = None
    tilde_beta0: Optional[np.ndarray] = None
    bar_beta0: Optional[np.ndarray] = None
    regime: str = CONSERVATIVE

    def __post_init__(self):
        for name in ("beta0", "tilde_beta0", "bar_beta0"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, np.atleast_1d(as_extended(val)))
        lam = as_extended(self.lambda0)
        if lam < 0:
            raise ConfigurationError("lambda0 must be nonnegative")
        object.__setattr__(self, "lambda0", lam)
        if self.regime == CONSERVATIVE and math.isinf(lam):
            raise ConfigurationError("conservative regime needs a finite lambda0")
        if self.regime == CONSISTENT and self.tilde_beta0 is None:
            raise ConfigurationError("consistent regime needs tilde_beta0")
        if self.regime not in (CONSERVATIVE, CONSISTENT):
            raise ConfigurationError(f"unknown regime {self.regime!r}")


# --- functional samplers ----------------------------------------------------


def _simulate(grid: BrownianGrid, delta_vu, rng, n_draws, c, full_path):
    k = grid.k
    steps = grid.steps
    l_vv, a_u, s_u = grid.factors()
    delta_vu = np.zeros(k) if delta_vu is None else np.atleast_1d(np.asarray(delta_vu, float))
    if delta_vu.shape != (k,):
        raise ConfigurationError(f"delta_vu must have length k={k}")
    dt = 1.0 / steps
    chunk = max(1, _CHUNK_ELEMENTS // (steps * k))
    zetas, itos = [], []
    done = 0
    while done < n_draws:
        m = min(chunk, n_draws - done)
        dw_v = rng.standard_normal((m, steps, k)) * math.sqrt(dt)
        db_v = dw_v @ l_vv.T
        if c is None or not np.any(c):
            path = np.cumsum(db_v, axis=1)
        else:
            path = np.empty_like(db_v)
            for j in range(k):
                phi = 1.0 - c[j] * dt
                path[:, :, j] = lfilter([1.0], [1.0, -phi], db_v[:, :, j], axis=1)
        lag = np.concatenate([np.zeros((m, 1, k)), path[:, :-1, :]], axis=1)
        zeta = np.einsum("nti,ntj->nij", lag, lag) * dt
        ito = np.einsum("nti,nt->ni", lag, dw_v @ a_u)
        if full_path:
            dw_perp = rng.standard_normal((m, steps)) * math.sqrt(dt)
            ito += s_u * np.einsum("nti,nt->ni", lag, dw_perp)
        else:
            # given W_v, sum lag_t dW_perp_t is exactly N(0, zeta)
            xi = rng.standard_normal((m, k))
            ito += s_u * np.einsum("nij,nj->ni", np.linalg.cholesky(zeta), xi)
        zetas.append(zeta)
        itos.append(ito + delta_vu)
        done += m
    zeta = np.concatenate(zetas)
    ito = np.concatenate(itos)
    Z = np.linalg.solve(zeta, ito[..., None])[..., 0]
    return FunctionalSample(zeta, ito, Z, None if c is None else np.asarray(c, float))


def sample_brownian_functionals(grid: BrownianGrid, delta_vu, rng: np.random.Generator,
                                n_draws: int = 1, full_path: bool = False) -> FunctionalSample:
    """Draw ``n_draws`` joint samples of (zeta_vv, int B_v dB_u + Delta_vu, Z).

    With ``full_path=False`` the part of the Ito sum driven by the Brownian
    component of B_u independent of B_v is drawn from its exact conditional
    Gaussian law given the B_v path; the result has the same distribution
    as the full left-endpoint sum at half the cost.
    """
    return _simulate(grid, delta_vu, rng, n_draws, None, full_path)


def sample_ou_functionals(grid: BrownianGrid, c, delta_vu, rng: np.random.Generator,
                          n_draws: int = 1, full_path: bool = False) -> FunctionalSample:
    """Local-to-unity version: B_v replaced by J^C with J_t = (1 - c dt) J_{t-1} + dB_v,t."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if c.shape != (grid.k,):
        raise ConfigurationError(f"c must have length k={grid.k}")
    if np.any(c < 0):
        raise ConfigurationError("c must be nonnegative")
    return _simulate(grid, delta_vu, rng, n_draws, c, full_path)


def functionals_from_increments(dw_v: np.ndarray, dw_u: np.ndarray, delta_vu=0.0) -> FunctionalSample:
    """Functionals for k=1, Omega=I from given Brownian increments (n, steps).

    Used to compare grids built on the same underlying path.
    """
    steps = dw_v.shape[1]
    path = np.cumsum(dw_v, axis=1)
    lag = np.concatenate([np.zeros((dw_v.shape[0], 1)), path[:, :-1]], axis=1)
    zeta = np.einsum("nt,nt->n", lag, lag) / steps
    ito = np.einsum("nt,nt->n", lag, dw_u) + delta_vu
    return FunctionalSample(zeta[:, None, None], ito[:, None], (ito / zeta)[:, None])


# --- univariate limits ------------------------------------------------------


def _default_fs(fs, draws, grid, rng):
    if fs is not None:
        return fs
    if rng is None:
        raise ValueError("need either a FunctionalSample or an rng")
    return sample_brownian_functionals(grid or BrownianGrid(), None, rng, draws)


def binomial_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n) if n else math.nan


def limit_selection_prob_conservative(lambda0: float, beta0, draws: int = 100_000,
                                      grid: Optional[BrownianGrid] = None, rng=None,
                                      fs: Optional[FunctionalSample] = None) -> float:
    """P(zeta^{1/2} |Z + beta0| <= sqrt(lambda0/2)) for conservative tuning."""
    beta0 = as_extended(beta0)
    if lambda0 < 0 or math.isinf(lambda0):
        raise ConfigurationError("lambda0 must be finite and nonnegative")
    if lambda0 == 0 or math.isinf(beta0):
        return 0.0
    zeta, Z = _default_fs(fs, draws, grid, rng).scalar()
    return float(np.mean(np.sqrt(zeta) * np.abs(Z + beta0) <= math.sqrt(lambda0 / 2.0)))


def limit_selection_prob_consistent(tilde_beta0, draws: int = 100_000,
                                    grid: Optional[BrownianGrid] = None, rng=None,
                                    fs: Optional[FunctionalSample] = None) -> float:
    """P(zeta^{1/2} <= 1 / (sqrt 2 |tilde_beta0|)) for consistent tuning."""
    tb = as_extended(tilde_beta0)
    if tb == 0:
        return 1.0
    if math.isinf(tb):
        return 0.0
    zeta, _ = _default_fs(fs, draws, grid, rng).scalar()
    return float(np.mean(np.sqrt(zeta) <= 1.0 / (math.sqrt(2.0) * abs(tb))))


def sample_limit_conservative(lambda0: float, beta0, fs: FunctionalSample) -> MixedDraws:
    """Limit of T(beta_AL - beta_T) under conservative tuning (k=1)."""
    beta0 = as_extended(beta0)
    if lambda0 < 0 or math.isinf(lambda0):
        raise ConfigurationError("lambda0 must be finite and nonnegative")
    zeta, Z = fs.scalar()
    if math.isinf(beta0):
        return MixedDraws(np.zeros(len(Z), bool), Z.copy())
    shifted = Z + beta0
    active = np.sqrt(zeta) * np.abs(shifted) > math.sqrt(lambda0 / 2.0)
    value = np.full(len(Z), -beta0)
    value[active] = Z[active] - lambda0 / (2.0 * zeta[active] * shifted[active])
    return MixedDraws(~active, value)


def sample_limit_consistent(tilde_beta0, fs: FunctionalSample) -> MixedDraws:
    """Limit of lambda^{-1/2} T (beta_AL - beta_T) under consistent tuning (k=1)."""
    tb = as_extended(tilde_beta0)
    zeta, _ = fs.scalar()
    n = len(zeta)
    if tb == 0 or math.isinf(tb):
        return MixedDraws(np.full(n, tb == 0), np.zeros(n))
    a0 = 1.0 / (math.sqrt(2.0) * abs(tb))
    active = np.sqrt(zeta) > a0
    value = np.full(n, -tb)
    value[active] = -1.0 / (2.0 * tb * zeta[active])
    return MixedDraws(~active, value)


def check_limit_triple(beta0, tilde_beta0, bar_beta0) -> None:
    """Raise ConfigurationError unless the three limits can arise from one sequence
    with lambda_T -> inf."""
    b0, tb, bb = (as_extended(v) for v in (beta0, tilde_beta0, bar_beta0))
    signs = {np.sign(v) for v in (b0, tb, bb) if v != 0}
    problems = []
    if len(signs) > 1:
        problems.append("nonzero limits must share one sign")
    if not math.isinf(b0) and (tb != 0 or bb != 0):
        problems.append("finite beta0 forces tilde_beta0 = bar_beta0 = 0")
    if tb != 0 and not math.isinf(tb) and (not math.isinf(b0) or bb != 0):
        problems.append("finite nonzero tilde_beta0 forces |beta0| = inf and bar_beta0 = 0")
    if tb == 0 and bb != 0:
        problems.append("tilde_beta0 = 0 forces bar_beta0 = 0")
    if bb != 0 and not (math.isinf(tb) and math.isinf(b0)):
        problems.append("nonzero bar_beta0 forces |tilde_beta0| = |beta0| = inf")
    if math.isinf(tb) and not math.isinf(b0):
        problems.append("|tilde_beta0| = inf forces |beta0| = inf")
    if problems:
        raise ConfigurationError(f"inconsistent limits (beta0={b0}, tilde_beta0={tb}, "
                                 f"bar_beta0={bb}): " + "; ".join(problems))


def sample_limit_consistent_rateT(beta0, tilde_beta0, bar_beta0, fs: FunctionalSample):
    """Limit of T(beta_AL - beta_T) under consistent tuning (k=1).

    Returns :class:`MixedDraws`, or :class:`Escape` when all mass drifts to
    -sign(tilde_beta0) * inf.
    """
    check_limit_triple(beta0, tilde_beta0, bar_beta0)
    b0, tb, bb = (as_extended(v) for v in (beta0, tilde_beta0, bar_beta0))
    zeta, Z = fs.scalar()
    n = len(Z)
    if tb == 0:
        return MixedDraws(np.ones(n, bool), np.full(n, -b0))
    if not math.isinf(tb):
        return Escape(-np.sign(tb) * math.inf)
    shift = 0.0 if math.isinf(bb) else 0.5 / (zeta * bb)
    return MixedDraws(np.zeros(n, bool), Z - shift)


# --- multivariate argmin ----------------------------------------------------


@dataclass
class CoordinatePlan:
    """Per-coordinate structure of the limit objective

    ``z' zeta z - 2 z' g + sum_j mu_j |z_j + s_j|`` with pinned coordinates
    fixed at zero. ``mu`` may vary across draws (shape (n, k)).
    """

    kinds: list
    g: np.ndarray
    mu: np.ndarray
    shift: np.ndarray


def classify_coordinates(mode: str, params: LimitParams, fs: FunctionalSample) -> CoordinatePlan:
    k, n = fs.k, len(fs)
    kinds = []
    mu = np.zeros((n, k))
    shift = np.zeros(k)
    g = fs.ito_term.copy()

    def vec(name):
        val = getattr(params, name)
        if val is None:
            raise ConfigurationError(f"mode {mode} needs {name}")
        if val.shape != (k,):
            raise ConfigurationError(f"{name} must have length k={k}")
        return val

    if mode == MODE_V:
        b0 = vec("beta0")
        lam0 = params.lambda0
        if math.isinf(lam0):
            raise ConfigurationError("mode V needs a finite lambda0")
        for j in range(k):
            if lam0 == 0 or math.isinf(b0[j]):
                kinds.append(FREE)
            else:
                kinds.append(WEIGHTED)
                shift[j] = b0[j]
                mu[:, j] = lam0 / np.abs(b0[j] + fs.Z[:, j])
    elif mode == MODE_VTILDE:
        tb = vec("tilde_beta0")
        g[:] = 0.0
        for j in range(k):
            if math.isinf(tb[j]):
                kinds.append(FREE)
            elif tb[j] == 0:
                kinds.append(PINNED)
            else:
                kinds.append(WEIGHTED)
                shift[j] = tb[j]
                mu[:, j] = 1.0 / abs(tb[j])
    elif mode == MODE_VBAR:
        b0, bb = vec("beta0"), vec("bar_beta0")
        for j in range(k):
            if math.isinf(bb[j]):
                kinds.append(FREE)
            elif bb[j] == 0 and b0[j] == 0:
                kinds.append(PINNED)
            elif bb[j] == 0:
                raise UnsupportedRegimeError(
                    f"coordinate {j}: bar_beta0 = 0 with beta0 = {b0[j]} gives a signed-infinite "
                    "penalty and an unbounded limit objective; use the univariate rate-T limits "
                    "(sample_limit_consistent_rateT) instead")
            else:
                kinds.append(LINEAR)
                # penalty contributes + z_j / bar_beta0_j
                g[:, j] -= 0.5 / bb[j]
    else:
        raise ConfigurationError(f"unknown mode {mode!r}")
    return CoordinatePlan(kinds, g, mu, shift)


def _limit_kkt(zeta, g, mu, shift, z, kink, pinned):
    grad = 2.0 * (np.einsum("nij,nj->ni", zeta, z) - g)
    viol = np.where(kink, np.maximum(0.0, np.abs(grad) - mu),
                    np.abs(grad + mu * np.sign(z + shift)))
    viol[:, pinned] = 0.0
    return viol.max(axis=1) if viol.size else np.zeros(len(z))


def limit_objective(mode: str, params: LimitParams, fs: FunctionalSample, z: np.ndarray) -> np.ndarray:
    """Value of the (convex) limit objective at z, up to an additive constant per draw."""
    plan = classify_coordinates(mode, params, fs)
    z = np.atleast_2d(z)
    pinned = np.array([kd == PINNED for kd in plan.kinds])
    val = np.einsum("ni,nij,nj->n", z, fs.zeta_vv, z) - 2.0 * np.einsum("ni,ni->n", z, plan.g)
    val = val + np.sum(plan.mu * np.abs(z + plan.shift), axis=1)
    bad = np.any(z[:, pinned] != 0, axis=1)
    return np.where(bad, np.inf, val)


@dataclass
class ArgminDraws:
    """Draws of the multivariate limit. ``zero[i, j]`` flags beta_AL,j = 0."""

    value: np.ndarray
    zero: np.ndarray
    kkt_residual: np.ndarray


def sample_limit_multivariate(mode: str, params: LimitParams, fs: FunctionalSample,
                              tol: float = 1e-10, max_iter: int = 10_000) -> ArgminDraws:
    """Minimize V, V-tilde or V-bar for every draw in ``fs``.

    Cyclic coordinate descent with shifted soft-thresholding, vectorized over
    draws and swept in ascending coordinate order until the KKT residual is
    at most ``tol`` (relative to the scale of the linear term).
    """
    plan = classify_coordinates(mode, params, fs)
    zeta, g, mu, shift = fs.zeta_vv, plan.g, plan.mu, plan.shift
    n, k = g.shape
    pinned = np.array([kd == PINNED for kd in plan.kinds])
    weighted = np.array([kd == WEIGHTED for kd in plan.kinds])
    # warm start: unpenalized solution with pinned coordinates removed
    z = np.zeros((n, k))
    free_idx = np.flatnonzero(~pinned)
    if free_idx.size:
        sub = zeta[:, free_idx][:, :, free_idx]
        z[:, free_idx] = np.linalg.solve(sub, g[:, free_idx][..., None])[..., 0]
    kink = np.zeros((n, k), bool)
    kink[:, pinned] = True
    scale = 1.0 + np.abs(g).max(axis=1) + np.abs(mu).max(axis=1)
    todo = np.ones(n, bool)
    for _ in range(max_iter):
        for j in range(k):
            if pinned[j]:
                continue
            rows = np.flatnonzero(todo)
            zj = zeta[rows, j, j]
            r = g[rows, j] - np.einsum("ni,ni->n", zeta[rows, j, :], z[rows]) + zj * z[rows, j]
            if not weighted[j]:
                z[rows, j] = r / zj
                continue
            t = zj * shift[j] + r
            thr = 0.5 * mu[rows, j]
            on = np.abs(t) > thr
            new = np.where(on, (t - np.sign(t) * thr) / zj - shift[j], -shift[j])
            z[rows, j] = new
            kink[rows, j] = ~on
        res = _limit_kkt(zeta, g, mu, shift, z, kink, pinned)
        todo = res > tol * scale
        if not todo.any():
            break
    else:
        raise ConvergenceError(f"{int(todo.sum())} draws did not converge in {max_iter} sweeps",
                               last_iterate=z, residual=float(res.max()))
    return ArgminDraws(z, kink, res)


def limit_selection_prob_multivariate(mode: str, params: LimitParams, coord: int,
                                      draws: int = 10_000, grid: Optional[BrownianGrid] = None,
                                      rng=None, fs: Optional[FunctionalSample] = None) -> float:
    """Limiting probability that coordinate ``coord`` of beta_AL is exactly zero."""
    if mode == MODE_VTILDE and params.tilde_beta0 is not None:
        tb = params.tilde_beta0[coord]
        if tb == 0:
            return 1.0
        if math.isinf(tb):
            return 0.0
    if mode == MODE_V and params.beta0 is not None:
        if math.isinf(params.beta0[coord]) or params.lambda0 == 0:
            return 0.0
    if mode == MODE_VBAR and params.bar_beta0 is not None:
        bb, b0 = params.bar_beta0[coord], params.beta0[coord]
        if bb == 0 and b0 == 0:
            return 1.0
        if bb != 0:
            return 0.0
    if fs is None:
        k = params.beta0.shape[0] if params.beta0 is not None else params.tilde_beta0.shape[0]
        grid = grid or BrownianGrid(omega=np.eye(1 + k))
        fs = _default_fs(None, draws, grid, rng)
    out = sample_limit_multivariate(mode, params, fs)
    return float(np.mean(out.zero[:, coord]))


def smallest_gram_eigenvalue(fs: FunctionalSample) -> np.ndarray:
    """Smallest eigenvalue of zeta_vv per draw (diagnostic only)."""
    return np.linalg.eigvalsh(fs.zeta_vv)[:, 0]
