import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid
from scipy.stats import ks_2samp, norm

from alcoint.dgp import CoefficientPath, ModelConfig, TuningRule
from alcoint.errors import ConfigurationError
from alcoint.limitdist import BrownianGrid, Escape, MixedDraws, sample_brownian_functionals
from alcoint.montecarlo import (BY_T, BY_T_OVER_SQRT_LAMBDA, CellResult, ExperimentPlan, compare,
                                ecdf_ks, kde, matched_limit, run_experiment, selection_frequency,
                                silverman_bandwidth, summarize_cell, summarize_draws,
                                summarize_mixed)


def plan(path, rules, sizes, reps, seed=3, scaling="auto", k=1):
    return ExperimentPlan(ModelConfig.standard(path, k), tuple(sizes), tuple(rules), reps, seed, scaling)


class TestPlan:
    def test_roundtrip(self):
        p = plan(CoefficientPath.fixed([0.1]), [TuningRule.power(0.5), TuningRule.linear()], [25, 50], 5)
        assert ExperimentPlan.from_dict(p.to_dict()).to_dict() == p.to_dict()

    def test_single_rule_key(self):
        d = plan(CoefficientPath.fixed([0.1]), [TuningRule.const(1)], [25], 5).to_dict()
        d["tuning_rule"] = d.pop("tuning_rules")[0]
        assert ExperimentPlan.from_dict(d).tuning_rules == (TuningRule.const(1),)

    @pytest.mark.parametrize("bad", [{"replications": 0}, {"sample_sizes": [2]}, {"scaling": "x"},
                                     {"seed": -1}])
    def test_invalid(self, bad):
        d = plan(CoefficientPath.fixed([0.1]), [TuningRule.const(1)], [25], 5).to_dict()
        d.update(bad)
        with pytest.raises(ConfigurationError):
            ExperimentPlan.from_dict(d)

    def test_missing_field(self):
        with pytest.raises(ConfigurationError, match="missing field"):
            ExperimentPlan.from_dict({"model": {"k": 1, "path": {"rule": "fixed", "beta": [1]}}})

    def test_auto_scaling(self):
        p = plan(CoefficientPath.fixed([0.1]), [TuningRule.const(1), TuningRule.linear()], [25], 1)
        assert p.scaling_for(TuningRule.const(1)) == BY_T
        assert p.scaling_for(TuningRule.linear()) == BY_T_OVER_SQRT_LAMBDA


class TestRunExperiment:
    def test_deterministic(self):
        p = plan(CoefficientPath.fixed([0.3]), [TuningRule.const(1)], [40], 1)
        a, b = run_experiment(p), run_experiment(p)
        assert np.array_equal(a[(40, "const1")].beta_al, b[(40, "const1")].beta_al)

    def test_independent_of_worker_count(self):
        p = plan(CoefficientPath.fixed([0.3, 0.0]), [TuningRule.const(1), TuningRule.linear()],
                 [30, 60], 13, k=2)
        serial, parallel = run_experiment(p, workers=1), run_experiment(p, workers=2)
        for key in serial:
            assert np.array_equal(serial[key].beta_al, parallel[key].beta_al)
            assert np.array_equal(serial[key].active, parallel[key].active)

    def test_zero_beta_consistent_tuning_selects_zero(self):
        p = plan(CoefficientPath.fixed([0.0]), [TuningRule.linear()], [1000], 2000)
        cell = run_experiment(p)[(1000, "linear")]
        assert np.mean(cell.active) < 0.02

    def test_vanishing_penalty(self):
        p = plan(CoefficientPath.fixed([0.2]), [TuningRule.const(1e-12)], [50], 50)
        cell = run_experiment(p)[(50, "const1e-12")]
        assert np.allclose(cell.scaled_error_al, cell.scaled_error_ols, atol=1e-8)

    def test_rate_certification(self):
        """99th percentile of the scaled error does not blow up with T."""
        cases = ((CoefficientPath.power_law([1.0], 1.0), TuningRule.const(1)),
                 (CoefficientPath.tuning_coupled([1.0]), TuningRule.power(0.5)),
                 (CoefficientPath.fixed([0.1]), TuningRule.power(0.5)))
        for path, rule in cases:
            res = run_experiment(plan(path, [rule], [250, 1000], 2000))
            q = [np.quantile(np.abs(res[(T, rule.label)].scaled_error_al), 0.99) for T in (250, 1000)]
            assert 0 < q[1] < 2 * q[0]

    def test_csv_roundtrip(self, tmp_path):
        p = plan(CoefficientPath.power_law([1.0, -1.0], 1.0), [TuningRule.const(2)], [30], 7, k=2)
        cell = run_experiment(p)[(30, "const2")]
        path = tmp_path / f"records_{cell.label}.csv"
        cell.write_csv(path)
        back = CellResult.read_csv(path, 30, cell.rule, cell.beta_T, cell.scaling)
        assert np.array_equal(back.beta_al, cell.beta_al) and np.array_equal(back.active, cell.active)
        assert path.read_text().splitlines()[0].startswith("rep_id,beta_ols1,beta_ols2,beta_al1")
        assert len(list(cell.records())) == 7
        assert 0.0 <= selection_frequency(cell, 1) <= 1.0


class TestKDE:
    def test_symmetric_two_points(self):
        curve = kde([-1.0, 1.0])
        assert np.allclose(curve.density, curve.density[::-1])
        assert np.allclose(curve.x, -curve.x[::-1])

    def test_bandwidth_override(self):
        assert kde(np.arange(10.0), bandwidth=0.37).bandwidth == 0.37

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            kde([1.0])

    def test_known_density(self):
        x = np.random.default_rng(0).standard_normal(10_000)
        curve = kde(x)
        l1 = trapezoid(np.abs(curve.density - norm.pdf(curve.x)), curve.x)
        assert l1 < 0.05
        assert curve.mass() == pytest.approx(1.0, abs=1e-3)
        assert abs(trapezoid(curve.x * curve.density, curve.x)) < 0.01
        assert len(curve.x) == 512

    def test_silverman(self):
        x = np.random.default_rng(1).standard_normal(1000)
        sd = x.std(ddof=1)
        iqr = np.subtract(*np.percentile(x, [75, 25]))
        assert silverman_bandwidth(x) == pytest.approx(0.9 * min(sd, iqr / 1.34) * 1000 ** -0.2)


class TestSummaries:
    def test_all_active(self):
        s = summarize_mixed(np.random.default_rng(0).standard_normal(100), np.ones(100, bool), -1.0)
        assert s.atom_prob == 0.0 and s.kde.mass() == pytest.approx(1.0, abs=1e-3)

    def test_all_inactive(self):
        s = summarize_mixed(np.full(20, -2.5), np.zeros(20, bool), -2.5)
        assert s.atom_prob == 1.0 and s.atom_location == -2.5 and s.kde is None

    def test_mass_conservation_on_cell(self):
        p = plan(CoefficientPath.power_law([1.0], 1.0), [TuningRule.const(1)], [100], 1000)
        cell = run_experiment(p)[(100, "const1")]
        s = summarize_cell(cell)
        assert s.atom_prob + s.kde.mass() == pytest.approx(1.0, abs=1e-3)
        assert s.atom_location == pytest.approx(-1.0)
        assert np.all(cell.scaled_error_al[~cell.active[:, 0], 0] == pytest.approx(-1.0))

    def test_summarize_draws(self):
        d = MixedDraws(np.array([True, False, False, False]), np.array([-1.0, 0.2, 0.5, 0.9]))
        s = summarize_draws(d)
        assert s.atom_prob == 0.25 and s.atom_location == -1.0


class TestKS:
    def test_trivial(self):
        assert ecdf_ks([1.0, 2.0], [1.0, 2.0]) == 0.0
        assert ecdf_ks([0.0], [1.0]) == 1.0

    def test_uniform(self):
        rng = np.random.default_rng(0)
        assert ecdf_ks(rng.random(10_000), rng.random(10_000)) < 0.03

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=60),
           st.lists(st.floats(-10, 10), min_size=1, max_size=60))
    @settings(max_examples=200, deadline=None)
    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_matches_scipy(self, a, b):
        assert ecdf_ks(a, b) == pytest.approx(ks_2samp(a, b, method="asymp").statistic, abs=1e-12)


class TestCompare:
    def _summary(self, x):
        return summarize_mixed(x, np.ones(len(x), bool), math.nan)

    def test_identical(self):
        x = np.random.default_rng(0).standard_normal(500)
        rep = compare(self._summary(x), MixedDraws(np.zeros(500, bool), x))
        assert rep.atom_prob_diff == 0.0 and rep.ks_continuous == 0.0

    def test_disjoint(self):
        rep = compare(self._summary(np.arange(5.0)), MixedDraws(np.zeros(3, bool), np.array([10.0, 11, 12])))
        assert rep.ks_continuous == 1.0

    def test_all_atom_side(self):
        rep = compare(self._summary(np.arange(5.0)), MixedDraws(np.ones(3, bool), np.zeros(3)))
        assert not rep.ks_defined and rep.atom_prob_diff == 1.0


class TestMatchedLimit:
    @pytest.fixture(scope="class")
    @classmethod
    def fs(cls):
        return sample_brownian_functionals(BrownianGrid(500), None, np.random.default_rng(0), 2000)

    def test_conservative(self, fs):
        path = CoefficientPath.power_law([1.0], 1.0)
        cell = run_experiment(plan(path, [TuningRule.const(1)], [50], 5))[(50, "const1")]
        d = matched_limit(cell, path, fs)
        assert isinstance(d, MixedDraws) and np.all(d.value[d.atom] == pytest.approx(-1.0))

    def test_fixed_beta_consistent_rate_T(self, fs):
        path = CoefficientPath.fixed([0.1])
        cell = run_experiment(plan(path, [TuningRule.linear()], [50], 5, scaling=BY_T))[(50, "linear")]
        d = matched_limit(cell, path, fs)
        assert isinstance(d, MixedDraws) and not d.atom.any()

    def test_escape(self, fs):
        path = CoefficientPath.tuning_coupled([1.0])
        cell = run_experiment(plan(path, [TuningRule.linear()], [50], 5, scaling=BY_T))[(50, "linear")]
        d = matched_limit(cell, path, fs)
        assert isinstance(d, Escape) and d.direction == -math.inf
