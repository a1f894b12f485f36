import numpy as np
import pytest

from fphmc import basis as bs
from fphmc import em, sim


class TestScenarioConfig:
    def test_unknown_scenario(self):
        with pytest.raises(ValueError):
            sim.scenario_config("D", 300)

    def test_scenario_coefficients(self):
        assert sim.scenario_config("A", 300).b == (1.0, 2.0, 0.5)
        assert sim.scenario_config("B", 300).b == (3.0, 2.0, 0.5)
        assert sim.scenario_config("C", 300).b == (-1.5, -2.0, -0.5)

    def test_invalid_sizes(self):
        with pytest.raises(ValueError):
            sim.ScenarioConfig(scenario="A", n=5)
        with pytest.raises(ValueError):
            sim.ScenarioConfig(scenario="A", n=100, mu_c=0.0)


class TestPolynomialComponents:
    def test_orthonormal_under_exact_quadrature(self):
        # 20-node Gauss-Legendre is exact for products of degree <= 9
        # polynomials, so the Gram matrix must be the identity
        nodes, weights = np.polynomial.legendre.leggauss(20)
        s = (nodes + 1.0) / 2.0
        qw = weights / 2.0
        phi = sim.orthonormal_polynomials(s)
        gram = phi.T @ (qw[:, None] * phi)
        assert np.allclose(gram, np.eye(10), atol=1e-10)

    def test_score_sds(self):
        sds = sim.score_sds()
        assert np.allclose(sds**2, 4.0 * np.arange(10, 0, -1))


class TestFunctionalCovariate:
    def test_score_variances(self):
        curves, scores = sim.gen_functional_covariate(10000, 101, 123)
        assert np.allclose(scores.var(axis=0), 4.0 * np.arange(10, 0, -1), atol=2.0)

    def test_mean_curve_near_zero(self):
        curves, _ = sim.gen_functional_covariate(10000, 101, 7)
        assert np.max(np.abs(curves.values.mean(axis=0))) < 0.2

    def test_deterministic(self):
        c1, s1 = sim.gen_functional_covariate(50, 51, 9)
        c2, s2 = sim.gen_functional_covariate(50, 51, 9)
        assert np.all(c1.values == c2.values)
        assert np.all(s1 == s2)


class TestGenScenario:
    @pytest.mark.parametrize(
        "scenario,target", [("A", 0.37), ("B", 0.16), ("C", 0.69)]
    )
    def test_cure_fractions(self, scenario, target):
        config = sim.ScenarioConfig(scenario=scenario, n=10000, seed=1)
        _, truth = sim.gen_scenario(config)
        assert abs(np.mean(truth["B"] == 0) - target) < 0.02

    def test_intercept_only_cure_fraction_with_flat_function(self):
        # zero out the functional effect: cure fraction = 1 - mean(expit(Zb))
        config = sim.ScenarioConfig(
            scenario="A", n=20000, seed=2, b=(0.0, 0.0, 0.0), b_fn=lambda s: 0.0 * np.asarray(s)
        )
        _, truth = sim.gen_scenario(config)
        assert abs(np.mean(truth["B"] == 0) - 0.5) < 0.02

    def test_cured_subjects_have_far_event_times(self):
        config = sim.ScenarioConfig(scenario="A", n=500, seed=3)
        _, truth = sim.gen_scenario(config)
        cured = truth["B"] == 0
        assert np.all(truth["T"][cured] == sim.CURED_TIME)

    def test_dataset_is_valid_and_deterministic(self):
        config = sim.scenario_config("B", 200, seed=4)
        ds1, _ = sim.gen_scenario(config)
        ds2, _ = sim.gen_scenario(config)
        assert np.all(ds1.time == ds2.time)
        assert np.all(ds1.event == ds2.event)
        assert np.all(ds1.z_curves.values == ds2.z_curves.values)
        assert isinstance(ds1, em.SurvivalDataset)


class TestIntegratedMetrics:
    def test_truth_recovered_exactly(self):
        truth = np.sin(np.linspace(0, 1, 51))
        estimates = np.tile(truth, (5, 1))
        bias2, var, mse = sim.integrated_metrics(estimates, truth)
        # the replicate mean of identical rows can differ from the rows by
        # one rounding step, so allow float noise
        assert bias2 < 1e-30 and var < 1e-30 and mse < 1e-30

    def test_constant_offset(self):
        truth = np.zeros(51)
        estimates = np.full((4, 51), 2.0)
        bias2, var, mse = sim.integrated_metrics(estimates, truth)
        assert np.isclose(bias2, 4.0) and var == 0.0 and np.isclose(mse, 4.0)

    def test_decomposition_identity(self, rng):
        truth = np.cos(np.linspace(0, np.pi, 41))
        estimates = truth + rng.standard_normal((30, 41))
        bias2, var, mse = sim.integrated_metrics(estimates, truth)
        assert np.isclose(mse, bias2 + var, rtol=1e-12)

    def test_needs_two_replicates(self):
        with pytest.raises(ValueError):
            sim.integrated_metrics(np.zeros((1, 10)), np.zeros(10))


class TestRunMc:
    def test_small_run_report(self):
        config = sim.scenario_config("A", 100, seed=17)
        report = sim.run_mc(config, reps=3)
        assert report.failures == 0
        assert set(report.metrics) == {"b(s)", "beta(s)"}
        for bias2, var, mse in report.metrics.values():
            assert np.isclose(mse, bias2 + var, rtol=1e-10)
        rows = report.rows()
        assert len(rows) == 2
        assert rows[0]["scenario"] == "A" and rows[0]["n"] == 100

    def test_deterministic(self):
        config = sim.scenario_config("A", 100, seed=17)
        r1 = sim.run_mc(config, reps=3)
        r2 = sim.run_mc(config, reps=3)
        assert r1.metrics == r2.metrics

    def test_needs_two_reps(self):
        with pytest.raises(ValueError):
            sim.run_mc(sim.scenario_config("A", 100), reps=1)
