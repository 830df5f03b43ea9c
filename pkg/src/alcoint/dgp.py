"""Data generating processes for cointegrating and predictive regressions.

The error process ``w_t = [u_t, v_t']'`` is a finite moving average of
Gaussian innovations; regressors are random walks or near-integrated AR(1)
processes driven by ``v_t``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigurationError, LengthError
from .extreal import to_json

COINTEGRATING = "cointegrating"
PREDICTIVE = "predictive"
UNIT_ROOT = "unit_root"
LOCAL_TO_UNITY = "local_to_unity"


@dataclass(frozen=True)
class InnovationSpec:
    """Gaussian innovations ``eps_t`` with covariance ``sigma``."""

    sigma: np.ndarray
    family: str = "gaussian"

    def __post_init__(self):
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        if sigma.shape[0] != sigma.shape[1] or sigma.shape[0] < 2:
            raise ConfigurationError(f"sigma must be square with dim >= 2, got {sigma.shape}")
        if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-12):
            raise ConfigurationError("sigma must be symmetric")
        try:
            np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            raise ConfigurationError("sigma must be positive definite") from None
        if self.family != "gaussian":
            raise ConfigurationError(f"unsupported innovation family {self.family!r}")
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    @classmethod
    def standard(cls, dim: int) -> "InnovationSpec":
        return cls(np.eye(dim))


@dataclass(frozen=True)
class LinearProcessSpec:
    """Truncated filter ``w_t = sum_{j=0}^q C_j eps_{t-j}``."""

    coeffs: tuple
    innovation: InnovationSpec

    def __post_init__(self):
        dim = self.innovation.dim
        coeffs = tuple(np.asarray(c, dtype=float).reshape(dim, dim) for c in self.coeffs)
        if not coeffs:
            raise ConfigurationError("filter needs at least C_0")
        c1 = sum(coeffs)
        if abs(np.linalg.det(c1)) < 1e-12:
            raise ConfigurationError("C(1) is singular: det(C(1)) must be non-zero")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def q(self) -> int:
        return len(self.coeffs) - 1

    @property
    def dim(self) -> int:
        return self.innovation.dim

    @classmethod
    def iid(cls, sigma) -> "LinearProcessSpec":
        innov = InnovationSpec(sigma)
        return cls((np.eye(innov.dim),), innov)


@dataclass(frozen=True)
class RegressorDynamics:
    kind: str = UNIT_ROOT
    c: Optional[np.ndarray] = None
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in (UNIT_ROOT, LOCAL_TO_UNITY):
            raise ConfigurationError(f"unknown regressor dynamics {self.kind!r}")
        if self.kind == LOCAL_TO_UNITY:
            if self.c is None:
                raise ConfigurationError("local_to_unity dynamics need a c vector")
            c = np.atleast_1d(np.asarray(self.c, dtype=float))
            if np.any(c <= 0):
                raise ConfigurationError("all c_j must be positive")
            object.__setattr__(self, "c", c)
        if self.x0 is not None:
            object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))

    def validate(self, k: int) -> None:
        if self.c is not None and self.kind == LOCAL_TO_UNITY and self.c.shape != (k,):
            raise ConfigurationError(f"c must have length k={k}")
        if self.x0 is not None and self.x0.shape != (k,):
            raise ConfigurationError(f"x0 must have length k={k}")


# --- tuning sequences -------------------------------------------------------


@dataclass(frozen=True)
class TuningRule:
    """Deterministic tuning sequence ``lambda_T = scale * T**exponent``.

    ``const`` keeps ``lambda_T`` fixed (conservative tuning), ``power`` uses
    ``T**a`` and ``linear`` is ``T``.
    """

    kind: str
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in ("const", "power", "linear"):
            raise ConfigurationError(f"unknown tuning rule {self.kind!r}")
        if self.kind == "const" and not self.value > 0:
            raise ConfigurationError("constant lambda must be positive")
        if self.kind == "power" and not self.value < 2:
            raise ConfigurationError("power tuning needs exponent < 2 so that lambda_T / T^2 -> 0")

    @classmethod
    def const(cls, lam: float) -> "TuningRule":
        return cls("const", float(lam))

    @classmethod
    def power(cls, a: float) -> "TuningRule":
        return cls("power", float(a))

    @classmethod
    def linear(cls) -> "TuningRule":
        return cls("linear", 1.0)

    @property
    def scale(self) -> float:
        return self.value if self.kind == "const" else 1.0

    @property
    def exponent(self) -> float:
        return {"const": 0.0, "power": self.value, "linear": 1.0}[self.kind]

    @property
    def conservative(self) -> bool:
        return self.exponent == 0.0

    def __call__(self, T: int) -> float:
        return self.scale * float(T) ** self.exponent

    @property
    def label(self) -> str:
        if self.kind == "const":
            return f"const{self.value:g}"
        if self.kind == "power":
            return f"pow{self.value:g}"
        return "linear"

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind != "linear":
            d["value"] = self.value
        return d

    @classmethod
    def from_dict(cls, d) -> "TuningRule":
        if isinstance(d, (int, float)):
            return cls.const(d)
        if isinstance(d, str):
            if d == "linear":
                return cls.linear()
            raise ConfigurationError(f"cannot parse tuning rule {d!r}")
        return cls(d["kind"], float(d.get("value", 1.0)))


# --- coefficient paths ------------------------------------------------------


def _power_limit(beta: np.ndarray, exponent: float, mult: float) -> np.ndarray:
    """lim_T beta * mult * T**exponent, entrywise, in the extended reals."""
    out = np.zeros_like(beta, dtype=float)
    nz = beta != 0
    if abs(exponent) < 1e-12:
        out[nz] = beta[nz] * mult
    elif exponent > 0:
        out[nz] = np.sign(beta[nz]) * math.inf
    return out


@dataclass(frozen=True)
class PathLimits:
    beta0: np.ndarray
    tilde_beta0: np.ndarray
    bar_beta0: np.ndarray

    def to_dict(self) -> dict:
        return {
            "beta0": to_json(self.beta0),
            "tilde_beta0": to_json(self.tilde_beta0),
            "bar_beta0": to_json(self.bar_beta0),
        }


@dataclass(frozen=True)
class CoefficientPath:
    """Rule producing the true coefficient ``beta_T`` for each sample size.

    ``fixed``: ``beta``; ``power_law``: ``beta * T**-delta``;
    ``tuning_coupled``: ``beta * sqrt(lambda_T) / T``; ``custom``: any
    callable ``fn(T, lambda_T)`` together with user supplied limits.
    """

    rule: str
    beta: np.ndarray
    delta: float = 0.0
    fn: Optional[Callable] = field(default=None, compare=False)
    custom_limits: Optional[PathLimits] = field(default=None, compare=False)

    def __post_init__(self):
        if self.rule not in ("fixed", "power_law", "tuning_coupled", "custom"):
            raise ConfigurationError(f"unknown coefficient rule {self.rule!r}")
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=float)))
        if self.rule == "custom" and (self.fn is None or self.custom_limits is None):
            raise ConfigurationError("custom coefficient paths need fn and custom_limits")

    @classmethod
    def fixed(cls, beta) -> "CoefficientPath":
        return cls("fixed", beta)

    @classmethod
    def power_law(cls, beta, delta: float) -> "CoefficientPath":
        return cls("power_law", beta, float(delta))

    @classmethod
    def tuning_coupled(cls, beta) -> "CoefficientPath":
        return cls("tuning_coupled", beta)

    @classmethod
    def custom(cls, fn, limits: PathLimits, k: int) -> "CoefficientPath":
        return cls("custom", np.full(k, np.nan), fn=fn, custom_limits=limits)

    @property
    def k(self) -> int:
        return self.beta.shape[0]

    def value(self, T: int, lam: float) -> np.ndarray:
        """beta_T for sample size T and tuning value lam = lambda_T."""
        if self.rule == "fixed":
            return self.beta.copy()
        if self.rule == "power_law":
            return self.beta * float(T) ** (-self.delta)
        if self.rule == "tuning_coupled":
            return self.beta * math.sqrt(lam) / T
        return np.atleast_1d(np.asarray(self.fn(T, lam), dtype=float))

    def finite_sample_params(self, T: int, lam: float) -> PathLimits:
        """The finite-T counterparts T*beta_T, lam^-1/2 T beta_T, lam^-1 T beta_T."""
        b = T * self.value(T, lam)
        return PathLimits(b, b / math.sqrt(lam), b / lam)

    def limits(self, tuning: TuningRule) -> PathLimits:
        """Extended-real limits of the scaled coefficient under ``tuning``."""
        if self.rule == "custom":
            self._check_custom(tuning)
            return self.custom_limits
        a, kappa = tuning.exponent, tuning.scale
        if self.rule == "tuning_coupled":
            e0, m0 = a / 2.0, math.sqrt(kappa)
        else:
            delta = self.delta if self.rule == "power_law" else 0.0
            e0, m0 = 1.0 - delta, 1.0
        return PathLimits(
            _power_limit(self.beta, e0, m0),
            _power_limit(self.beta, e0 - a / 2.0, m0 / math.sqrt(kappa)),
            _power_limit(self.beta, e0 - a, m0 / kappa),
        )

    def _check_custom(self, tuning: TuningRule) -> None:
        lim = self.custom_limits
        lo, hi = 1e6, 1e9
        for name, target in (("beta0", lim.beta0), ("tilde_beta0", lim.tilde_beta0),
                             ("bar_beta0", lim.bar_beta0)):
            at_lo = getattr(self.finite_sample_params(lo, tuning(lo)), name)
            at_hi = getattr(self.finite_sample_params(hi, tuning(hi)), name)
            for t, a, b in zip(np.atleast_1d(target), at_lo, at_hi):
                if math.isinf(t):
                    ok = np.sign(b) == np.sign(t) and abs(b) > abs(a) and abs(b) > 1e2
                else:
                    ok = abs(b - t) <= 1e-2 * max(1.0, abs(t))
                if not ok:
                    raise ConfigurationError(
                        f"custom path limit {name}={t} inconsistent with values "
                        f"{a:.4g} (T=1e6), {b:.4g} (T=1e9) under {tuning.label}"
                    )

    def to_dict(self) -> dict:
        if self.rule == "custom":
            raise ConfigurationError("custom coefficient paths cannot be serialized")
        d = {"rule": self.rule, "beta": self.beta.tolist()}
        if self.rule == "power_law":
            d["delta"] = self.delta
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CoefficientPath":
        return cls(d["rule"], d["beta"], float(d.get("delta", 0.0)))


@dataclass(frozen=True)
class ModelConfig:
    k: int
    errors: LinearProcessSpec
    dynamics: RegressorDynamics
    path: CoefficientPath
    flavor: str = COINTEGRATING

    def __post_init__(self):
        if self.k < 1:
            raise ConfigurationError("k must be >= 1")
        if self.errors.dim != 1 + self.k:
            raise ConfigurationError(
                f"innovation dim {self.errors.dim} does not match 1+k={1 + self.k}"
            )
        self.dynamics.validate(self.k)
        if self.path.k != self.k:
            raise ConfigurationError(f"coefficient vector has length {self.path.k}, expected {self.k}")
        if self.flavor not in (COINTEGRATING, PREDICTIVE):
            raise ConfigurationError(f"unknown regression flavor {self.flavor!r}")

    @classmethod
    def standard(cls, path: CoefficientPath, k: int = 1) -> "ModelConfig":
        """i.i.d. N(0, I) errors, unit-root regressors: the standard simulation design."""
        return cls(k, LinearProcessSpec.iid(np.eye(1 + k)), RegressorDynamics(), path)

    def to_dict(self) -> dict:
        dyn = {"kind": self.dynamics.kind}
        if self.dynamics.c is not None:
            dyn["c"] = self.dynamics.c.tolist()
        if self.dynamics.x0 is not None:
            dyn["x0"] = self.dynamics.x0.tolist()
        return {
            "k": self.k,
            "errors": {
                "sigma": self.errors.innovation.sigma.tolist(),
                "coeffs": [c.tolist() for c in self.errors.coeffs],
                "family": self.errors.innovation.family,
            },
            "dynamics": dyn,
            "path": self.path.to_dict(),
            "flavor": self.flavor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        try:
            k = int(d["k"])
            err = d.get("errors", {})
            sigma = err.get("sigma", np.eye(1 + k).tolist())
            innov = InnovationSpec(sigma, err.get("family", "gaussian"))
            coeffs = err.get("coeffs", [np.eye(1 + k).tolist()])
            dyn = d.get("dynamics", {})
            return cls(
                k,
                LinearProcessSpec(tuple(coeffs), innov),
                RegressorDynamics(dyn.get("kind", UNIT_ROOT), dyn.get("c"), dyn.get("x0")),
                CoefficientPath.from_dict(d["path"]),
                d.get("flavor", COINTEGRATING),
            )
        except KeyError as exc:
            raise ConfigurationError(f"model config missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"malformed model config: {exc}") from None


# --- generators -------------------------------------------------------------


def gen_innovations(spec: InnovationSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. rows with covariance ``spec.sigma``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    chol = np.linalg.cholesky(spec.sigma)
    return rng.standard_normal((n, spec.dim)) @ chol.T


def gen_errors(spec: LinearProcessSpec, eps: np.ndarray, T: Optional[int] = None) -> np.ndarray:
    """Apply the MA filter; the first ``q`` rows of ``eps`` are warm-up.

    Column 0 of the result is ``u_t``, columns 1..k are ``v_t``.
    """
    eps = np.asarray(eps, dtype=float)
    q = spec.q
    if T is None:
        T = eps.shape[0] - q
    if T < 1 or eps.shape[0] < T + q:
        raise LengthError(f"need at least T+q={T + q} innovation rows, got {eps.shape[0]}")
    w = np.zeros((T, spec.dim))
    for j, cj in enumerate(spec.coeffs):
        w += eps[q - j:q - j + T] @ cj.T
    return w


def build_regressors(v: np.ndarray, dyn: RegressorDynamics, T: Optional[int] = None) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if T is None:
        T = v.shape[0]
    if v.shape[0] != T:
        raise LengthError(f"v has {v.shape[0]} rows, expected T={T}")
    k = v.shape[1]
    x0 = np.zeros(k) if dyn.x0 is None else dyn.x0
    if dyn.kind == UNIT_ROOT:
        return x0 + np.cumsum(v, axis=0)
    x = np.empty_like(v)
    for j in range(k):
        phi = 1.0 - dyn.c[j] / T
        x[:, j], _ = lfilter([1.0], [1.0, -phi], v[:, j], zi=[phi * x0[j]])
    return x


def regressor_matrix(x: np.ndarray, flavor: str = COINTEGRATING) -> np.ndarray:
    """Design matrix: x_t (cointegrating) or x_{t-1}, t=2..T (predictive)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return x[:-1] if flavor == PREDICTIVE else x


def build_response(x: np.ndarray, beta, u: np.ndarray, flavor: str = COINTEGRATING) -> np.ndarray:
    """y_t = x_t' beta + u_t, or y_t = x_{t-1}' beta + u_t for t >= 2 (predictive).

    The predictive response has T-1 entries, aligned with ``regressor_matrix``.
    """
    X = regressor_matrix(x, flavor)
    u = np.asarray(u, dtype=float)
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if X.shape[1] != beta.shape[0]:
        raise ValueError("beta length does not match number of regressors")
    if flavor == PREDICTIVE:
        return X @ beta + u[1:]
    return X @ beta + u


def long_run_moments(spec: LinearProcessSpec, predictive: bool = False):
    """Long-run covariance Omega and one-sided covariance Delta_vu of w_t.

    Both are exact for the finite filter. With ``predictive=True`` the sum
    for Delta_vu starts at lag 1.
    """
    sigma = spec.innovation.sigma
    c1 = sum(spec.coeffs)
    if abs(np.linalg.det(c1)) < 1e-12:
        raise ConfigurationError("C(1) is singular")
    omega = c1 @ sigma @ c1.T
    q = spec.q
    delta = np.zeros(spec.dim - 1)
    for h in range(1 if predictive else 0, q + 1):
        gamma_h = sum(spec.coeffs[j] @ sigma @ spec.coeffs[j + h].T for j in range(q + 1 - h))
        delta += gamma_h[1:, 0]
    return omega, delta


@dataclass
class SimulatedPath:
    """One simulated sample. ``X``/``y`` are the regression-ready arrays."""

    x: np.ndarray
    u: np.ndarray
    v: np.ndarray
    y: np.ndarray
    X: np.ndarray
    beta: np.ndarray
    flavor: str

    @property
    def T(self) -> int:
        return self.x.shape[0]

    def to_csv(self, fh=None) -> Optional[str]:
        """Write ``t,y,x1..xk,u,v1..vk``. Predictive paths leave y empty at t=1."""
        own = fh is None
        buf = io.StringIO() if own else fh
        k = self.x.shape[1]
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "y"] + [f"x{j + 1}" for j in range(k)] + ["u"]
                        + [f"v{j + 1}" for j in range(k)])
        offset = self.T - self.y.shape[0]
        for t in range(self.T):
            y = repr(float(self.y[t - offset])) if t >= offset else ""
            writer.writerow([t + 1, y] + [repr(float(a)) for a in self.x[t]]
                            + [repr(float(self.u[t]))] + [repr(float(a)) for a in self.v[t]])
        return buf.getvalue() if own else None


def simulate(config: ModelConfig, T: int, rng: np.random.Generator,
             beta: Optional[Sequence[float]] = None, lam: float = 1.0) -> SimulatedPath:
    """Generate one sample of size T; ``beta`` defaults to the path value."""
    eps = gen_innovations(config.errors.innovation, T + config.errors.q, rng)
    w = gen_errors(config.errors, eps, T)
    u, v = w[:, 0], w[:, 1:]
    x = build_regressors(v, config.dynamics, T)
    b = config.path.value(T, lam) if beta is None else np.atleast_1d(np.asarray(beta, float))
    y = build_response(x, b, u, config.flavor)
    return SimulatedPath(x, u, v, y, regressor_matrix(x, config.flavor), b, config.flavor)
