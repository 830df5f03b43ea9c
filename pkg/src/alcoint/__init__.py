"""Adaptive LASSO estimation in cointegrating regressions.

Data generation, OLS and adaptive LASSO estimators, samplers for the
limiting laws of the scaled estimation error, and a Monte Carlo harness
comparing the two.
"""

__version__ = "0.1.0"

from .dgp import (CoefficientPath, InnovationSpec, LinearProcessSpec, ModelConfig,  # noqa: E402
                  RegressorDynamics, TuningRule, long_run_moments, simulate)
from .errors import (AlcointError, ConfigurationError, ConvergenceError,  # noqa: E402
                     EstimationError, LengthError, UnsupportedRegimeError)
from .estimators import (Dataset, FitResult, TuningParams, adaptive_lasso_multivariate,  # noqa: E402
                         adaptive_lasso_univariate, finite_sample_decomposition, ols_fit)
from .limitdist import (BrownianGrid, Escape, FunctionalSample, LimitParams,  # noqa: E402
                        MixedDraws, sample_brownian_functionals, sample_ou_functionals)
from .montecarlo import (ExperimentPlan, compare, ecdf_ks, kde, run_experiment,  # noqa: E402
                         summarize_mixed)

__all__ = [
    "AlcointError", "BrownianGrid", "CoefficientPath", "ConfigurationError", "ConvergenceError",
    "Dataset", "Escape", "EstimationError", "ExperimentPlan", "FitResult", "FunctionalSample",
    "InnovationSpec", "LengthError", "LimitParams", "LinearProcessSpec", "MixedDraws",
    "ModelConfig", "RegressorDynamics", "TuningParams", "TuningRule", "UnsupportedRegimeError",
    "adaptive_lasso_multivariate", "adaptive_lasso_univariate", "compare", "ecdf_ks", "kde",
    "finite_sample_decomposition", "long_run_moments", "ols_fit", "run_experiment",
    "sample_brownian_functionals", "sample_ou_functionals", "simulate", "summarize_mixed",
]
