import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alcoint.dgp import (COINTEGRATING, LOCAL_TO_UNITY, PREDICTIVE, CoefficientPath, InnovationSpec,
                         LinearProcessSpec, ModelConfig, PathLimits, RegressorDynamics, TuningRule,
                         build_regressors, build_response, gen_errors, gen_innovations,
                         long_run_moments, simulate)
from alcoint.errors import ConfigurationError, LengthError


def naive_ma(coeffs, eps, T):
    """w_t = sum_j C_j eps_{t-j}, written out with explicit loops."""
    q = len(coeffs) - 1
    dim = eps.shape[1]
    w = np.zeros((T, dim))
    for t in range(T):
        for j, C in enumerate(coeffs):
            for a in range(dim):
                for b in range(dim):
                    w[t, a] += C[a][b] * eps[t + q - j, b]
    return w


class TestInnovations:
    def test_identity_covariance(self):
        eps = gen_innovations(InnovationSpec(np.eye(2)), 1_000_000, np.random.default_rng(0))
        assert np.allclose(np.cov(eps.T), np.eye(2), atol=0.01)

    def test_correlation(self):
        spec = InnovationSpec([[1.0, 0.5], [0.5, 1.0]])
        eps = gen_innovations(spec, 1_000_000, np.random.default_rng(1))
        assert abs(np.corrcoef(eps.T)[0, 1] - 0.5) < 0.01

    def test_deterministic(self):
        spec = InnovationSpec(np.eye(3))
        a = gen_innovations(spec, 50, np.random.default_rng(5))
        b = gen_innovations(spec, 50, np.random.default_rng(5))
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("sigma", [[[1, 2], [2, 1]], [[1, 0.1], [0, 1]], [[1.0]]])
    def test_bad_sigma(self, sigma):
        with pytest.raises(ConfigurationError):
            InnovationSpec(sigma)


class TestMovingAverage:
    def test_identity_filter(self):
        eps = np.random.default_rng(0).standard_normal((20, 2))
        w = gen_errors(LinearProcessSpec.iid(np.eye(2)), eps)
        assert np.array_equal(w, eps)

    def test_constant_input(self):
        spec = LinearProcessSpec((np.eye(2), 0.5 * np.eye(2)), InnovationSpec(np.eye(2)))
        w = gen_errors(spec, np.ones((11, 2)))
        assert w.shape == (10, 2)
        assert np.allclose(w, 1.5)

    def test_matches_naive_convolution(self):
        rng = np.random.default_rng(3)
        coeffs = [rng.standard_normal((2, 2)) + 2 * np.eye(2), rng.standard_normal((2, 2))]
        spec = LinearProcessSpec(tuple(coeffs), InnovationSpec(np.eye(2)))
        eps = rng.standard_normal((41, 2))
        assert np.allclose(gen_errors(spec, eps), naive_ma(coeffs, eps, 40), atol=1e-12, rtol=0)

    def test_short_input(self):
        spec = LinearProcessSpec((np.eye(2), 0.5 * np.eye(2)), InnovationSpec(np.eye(2)))
        with pytest.raises(LengthError):
            gen_errors(spec, np.ones((10, 2)), T=10)

    def test_singular_long_run_filter(self):
        with pytest.raises(ConfigurationError):
            LinearProcessSpec((np.eye(2), -np.eye(2)), InnovationSpec(np.eye(2)))


class TestRegressors:
    def test_random_walk(self):
        x = build_regressors(np.ones(6), RegressorDynamics())
        assert np.array_equal(x[:, 0], np.arange(1, 7))

    def test_small_c_approaches_unit_root(self):
        v = np.random.default_rng(0).standard_normal((200, 1))
        near = build_regressors(v, RegressorDynamics(LOCAL_TO_UNITY, [1e-10]))
        assert np.allclose(near, build_regressors(v, RegressorDynamics()), atol=1e-6)

    def test_c_equal_T_gives_white_noise(self):
        v = np.random.default_rng(0).standard_normal((50, 1))
        x = build_regressors(v, RegressorDynamics(LOCAL_TO_UNITY, [50.0]))
        assert np.allclose(x, v)

    def test_initial_value(self):
        v = np.zeros((5, 1))
        x = build_regressors(v, RegressorDynamics(LOCAL_TO_UNITY, [1.0], [2.0]))
        phi = 1 - 1 / 5
        assert np.allclose(x[:, 0], 2.0 * phi ** np.arange(1, 6))

    def test_nonpositive_c(self):
        with pytest.raises(ConfigurationError):
            RegressorDynamics(LOCAL_TO_UNITY, [0.0])


class TestResponse:
    def test_zero_beta(self):
        u = np.arange(5.0)
        assert np.array_equal(build_response(np.ones((5, 1)), [0.0], u), u)

    def test_cointegrating(self):
        x = np.arange(1.0, 6.0)[:, None]
        assert np.allclose(build_response(x, [2.0], np.zeros(5)), 2 * x[:, 0])

    def test_predictive(self):
        x = np.arange(1.0, 6.0)[:, None]
        y = build_response(x, [2.0], np.zeros(5), PREDICTIVE)
        assert np.allclose(y, 2 * x[:-1, 0])


class TestLongRun:
    def test_iid_identity(self):
        omega, delta = long_run_moments(LinearProcessSpec.iid(np.eye(2)))
        assert np.allclose(omega, np.eye(2)) and np.allclose(delta, 0)

    def test_iid_correlated(self):
        omega, delta = long_run_moments(LinearProcessSpec.iid([[1, 0.3], [0.3, 1]]))
        assert np.allclose(delta, [0.3])
        _, delta_pred = long_run_moments(LinearProcessSpec.iid([[1, 0.3], [0.3, 1]]), predictive=True)
        assert np.allclose(delta_pred, [0.0])

    def test_against_empirical_autocovariances(self):
        C0 = np.array([[1.0, 0.0], [0.4, 1.0]])
        C1 = np.array([[0.5, 0.3], [-0.6, 0.2]])
        spec = LinearProcessSpec((C0, C1), InnovationSpec([[1.0, 0.2], [0.2, 1.0]]))
        rng = np.random.default_rng(11)
        n = 4_000_000
        w = gen_errors(spec, gen_innovations(spec.innovation, n + 1, rng))
        u, v = w[:, 0], w[:, 1]
        emp_delta = sum(np.mean(v[: n - h] * u[h:]) for h in range(0, 4))
        omega, delta = long_run_moments(spec)
        # Monte Carlo error of each lag average is about 1/sqrt(n) = 5e-4
        assert abs(emp_delta - delta[0]) < 0.01
        # an MA(1) has autocovariances only at lags 0 and 1
        gam = lambda h: (w[: n - h].T @ w[h:]) / n  # noqa: E731
        emp = gam(0) + gam(1) + gam(1).T
        assert np.allclose(emp, omega, atol=0.01)


class TestTuningAndPaths:
    def test_rules(self):
        assert TuningRule.const(2.0)(1000) == 2.0
        assert TuningRule.power(0.5)(100) == pytest.approx(10.0)
        assert TuningRule.linear()(250) == 250.0
        assert TuningRule.const(1).conservative and not TuningRule.linear().conservative

    def test_power_must_be_below_two(self):
        with pytest.raises(ConfigurationError):
            TuningRule.power(2.0)

    def test_limits_fixed_beta_linear(self):
        lim = CoefficientPath.fixed([0.1, 0.0]).limits(TuningRule.linear())
        assert list(lim.beta0) == [math.inf, 0.0]
        assert list(lim.tilde_beta0) == [math.inf, 0.0]
        assert lim.bar_beta0[0] == pytest.approx(0.1)

    def test_limits_local_path(self):
        lim = CoefficientPath.power_law([1.0], 1.0).limits(TuningRule.const(2.0))
        assert lim.beta0[0] == 1.0 and lim.tilde_beta0[0] == pytest.approx(1 / math.sqrt(2))

    def test_limits_coupled_path(self):
        lim = CoefficientPath.tuning_coupled([-1.0]).limits(TuningRule.linear())
        assert lim.beta0[0] == -math.inf and lim.tilde_beta0[0] == -1.0 and lim.bar_beta0[0] == 0.0

    def test_custom_path_checked(self):
        good = PathLimits(np.array([math.inf]), np.array([1.0]), np.array([0.0]))
        path = CoefficientPath.custom(lambda T, lam: [math.sqrt(lam) / T], good, 1)
        assert path.limits(TuningRule.linear()) is good
        bad = PathLimits(np.array([math.inf]), np.array([3.0]), np.array([0.0]))
        with pytest.raises(ConfigurationError):
            CoefficientPath.custom(lambda T, lam: [math.sqrt(lam) / T], bad, 1).limits(TuningRule.linear())

    @given(st.floats(-5, 5), st.floats(0.1, 1.9))
    @settings(max_examples=50, deadline=None)
    def test_finite_sample_params_consistent(self, beta, a):
        path = CoefficientPath.fixed([beta])
        rule = TuningRule.power(a)
        fin = path.finite_sample_params(400, rule(400))
        assert fin.tilde_beta0[0] * math.sqrt(rule(400)) == pytest.approx(fin.beta0[0], abs=1e-9)
        assert fin.bar_beta0[0] * rule(400) == pytest.approx(fin.beta0[0], abs=1e-9)


class TestModelConfig:
    def test_roundtrip(self):
        cfg = ModelConfig.standard(CoefficientPath.power_law([1.0, 0.0], 0.5), k=2)
        again = ModelConfig.from_dict(cfg.to_dict())
        assert again.to_dict() == cfg.to_dict()

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigurationError):
            ModelConfig(2, LinearProcessSpec.iid(np.eye(2)), RegressorDynamics(),
                        CoefficientPath.fixed([1.0, 1.0]))

    def test_simulate_shapes_and_csv(self):
        cfg = ModelConfig.standard(CoefficientPath.fixed([1.0]))
        path = simulate(cfg, 30, np.random.default_rng(0))
        assert path.X.shape == (30, 1) and path.y.shape == (30,)
        assert np.allclose(path.y, path.x[:, 0] + path.u)
        text = path.to_csv()
        assert text.splitlines()[0] == "t,y,x1,u,v1"
        assert len(text.splitlines()) == 31

    def test_simulate_predictive(self):
        cfg = ModelConfig(1, LinearProcessSpec.iid(np.eye(2)), RegressorDynamics(),
                          CoefficientPath.fixed([2.0]), PREDICTIVE)
        path = simulate(cfg, 30, np.random.default_rng(0))
        assert path.y.shape == (29,)
        assert np.allclose(path.y, 2 * path.x[:-1, 0] + path.u[1:])
        assert cfg.flavor != COINTEGRATING
