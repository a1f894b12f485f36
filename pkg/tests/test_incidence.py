import numpy as np
import pytest
from scipy import optimize
from scipy.special import expit, logit

from fphmc import basis as bs
from fphmc import incidence as inc
from fphmc._newton import newton_maximize
from fphmc.errors import ConvergenceError


def make_problem(rng, n=60, p=2, K=6):
    Z = np.column_stack([np.ones(n), rng.uniform(-1, 1, (n, p - 1))])
    V = rng.standard_normal((n, K)) * 0.5
    w = rng.uniform(0, 1, n)
    penalty = bs.difference_penalty(K, 2)
    return Z, V, w, penalty


def numeric_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


class TestLoglik:
    def test_symmetric_point(self):
        n = 17
        Z = np.ones((n, 1))
        w = np.full(n, 0.5)
        value, _, _ = inc.incidence_loglik([0.0], [], Z, None, w, 0.0, None)
        assert np.isclose(value, n * np.log(0.5))

    def test_weights_validated(self):
        Z = np.ones((3, 1))
        with pytest.raises(ValueError):
            inc.incidence_loglik([0.0], [], Z, None, [0.5, 1.2, 0.3], 0.0, None)

    def test_gradient_matches_finite_differences(self, rng):
        Z, V, w, penalty = make_problem(rng)
        p, K = Z.shape[1], V.shape[1]

        def value_at(x):
            return inc.incidence_loglik(x[:p], x[p:], Z, V, w, 0.7, penalty)[0]

        for _ in range(20):
            x = rng.standard_normal(p + K) * 0.5
            _, grad, hess = inc.incidence_loglik(x[:p], x[p:], Z, V, w, 0.7, penalty)
            fd = numeric_grad(value_at, x)
            assert np.allclose(grad, fd, rtol=1e-5, atol=1e-7)
            fd_hess_col = numeric_grad(
                lambda y: inc.incidence_loglik(y[:p], y[p:], Z, V, w, 0.7, penalty)[1][0], x
            )
            assert np.allclose(hess[0], fd_hess_col, rtol=1e-4, atol=1e-6)

    def test_intercept_only_mle(self, rng):
        w = rng.uniform(0.1, 0.9, 25)
        Z = np.ones((25, 1))
        fit = inc.fit_incidence(Z, None, w, None, 0.0)
        assert np.isclose(fit.b[0], logit(w.mean()), atol=1e-7)


class TestFit:
    def test_half_weights_give_zero(self, rng):
        Z, V, w, penalty = make_problem(rng)
        fit = inc.fit_incidence(Z, V, np.full(Z.shape[0], 0.5), penalty, 0.0)
        assert np.all(np.abs(fit.b) < 1e-6)
        assert np.all(np.abs(fit.theta_b) < 1e-6)

    def test_brute_force_oracle(self, rng):
        # 6 subjects, intercept + one scalar, no functional part
        Z = np.column_stack([np.ones(6), np.array([-1.0, -0.5, 0.0, 0.2, 0.7, 1.0])])
        w = np.array([0.1, 0.3, 0.8, 0.5, 0.9, 0.6])

        def neg_loglik(coef):
            eta = Z @ coef
            pi = expit(eta)
            return -np.sum(w * np.log(pi) + (1 - w) * np.log(1 - pi))

        res = optimize.minimize(neg_loglik, np.zeros(2), method="Nelder-Mead",
                                options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 5000})
        fit = inc.fit_incidence(Z, None, w, None, 0.0)
        assert np.allclose(fit.b, res.x, atol=1e-4)

    def test_matches_unpenalized_logistic_oracle(self, rng):
        # 0/1 responses, lambda = 0, no functional covariate
        Z = np.column_stack([np.ones(30), rng.uniform(-1, 1, 30)])
        y = (rng.uniform(size=30) < expit(Z @ [0.3, 1.0])).astype(float)

        def neg_loglik(coef):
            eta = Z @ coef
            return -np.sum(y * eta - np.logaddexp(0.0, eta))

        res = optimize.minimize(neg_loglik, np.zeros(2), method="Nelder-Mead",
                                options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 5000})
        fit = inc.fit_incidence(Z, None, y, None, 0.0)
        assert np.allclose(fit.b, res.x, atol=1e-4)

    def test_separation_guard(self):
        # perfectly separated responses drive coefficients to the cap; the
        # small covariate scale forces the slope estimate well past the cap
        Z = np.column_stack([np.ones(8), np.r_[-0.1 * np.ones(4), 0.1 * np.ones(4)]])
        y = np.r_[np.zeros(4), np.ones(4)]
        fit = inc.fit_incidence(Z, None, y, None, 0.0)
        assert fit.separation_flagged
        assert np.all(np.abs(np.r_[fit.b, fit.theta_b]) <= inc.COEF_CAP + 1e-12)

    def test_accepted_steps_never_decrease_objective(self, rng):
        Z, V, w, penalty = make_problem(rng)
        p, K = Z.shape[1], V.shape[1]

        def objective(x):
            return inc.incidence_loglik(x[:p], x[p:], Z, V, w, 0.5, penalty)

        values = []
        newton_maximize(objective, np.zeros(p + K), accepted_values=values)
        assert np.all(np.diff(values) >= -1e-9 * (1.0 + np.abs(values[:-1])))


class TestLambdaSelection:
    def test_smooth_truth_beats_endpoints(self, rng):
        grid = bs.make_grid(41)
        basis = bs.bspline_basis(grid, K=10, degree=3)
        qw = bs.quadrature_weights(grid)
        penalty = bs.difference_penalty(10, 2)
        n = 150
        curves = bs.FunctionalCovariate(grid, rng.standard_normal((n, 41)) * 3.0)
        V = bs.functional_design(curves, basis, qw)
        Z = np.ones((n, 1))
        truth = 4.0 * np.sin(np.pi * grid.points)
        # binary responses from the true model; the noise makes the smallest
        # candidate overfit and the largest oversmooth
        p_true = expit(curves.values @ (qw * truth))
        w = (rng.uniform(size=n) < p_true).astype(float)
        grid_lam = 10.0 ** np.arange(-4, 5)
        lam = inc.select_lambda_incidence(Z, V, w, penalty, grid_lam)

        def ise(l):
            f = inc.fit_incidence(Z, V, w, penalty, l)
            est = basis.values @ f.theta_b
            return qw @ (est - truth) ** 2

        assert ise(lam) < ise(grid_lam[0])
        assert ise(lam) < ise(grid_lam[-1])

    def test_constant_weights_pick_max_lambda(self, rng):
        Z, V, _, penalty = make_problem(rng)
        w = np.full(Z.shape[0], 0.4)
        lam = inc.select_lambda_incidence(Z, V, w, penalty, 10.0 ** np.arange(-4, 5))
        assert lam == 1e4

    def test_single_candidate(self, rng):
        Z, V, w, penalty = make_problem(rng)
        assert inc.select_lambda_incidence(Z, V, w, penalty, [1.0]) == 1.0

    def test_empty_grid(self, rng):
        Z, V, w, penalty = make_problem(rng)
        with pytest.raises(ValueError):
            inc.select_lambda_incidence(Z, V, w, penalty, [])

    def test_edf_monotone_in_lambda(self, rng):
        Z, V, w, penalty = make_problem(rng, n=100)
        edfs = [
            inc.fit_incidence(Z, V, w, penalty, lam).edf
            for lam in 10.0 ** np.arange(-4, 5)
        ]
        assert np.all(np.diff(edfs) <= 1e-8)


class TestPredict:
    def test_zero_coefficients(self, rng):
        Z, V, w, penalty = make_problem(rng)
        fit = inc.IncidenceFit(
            b=np.zeros(Z.shape[1]), theta_b=np.zeros(V.shape[1]),
            lambda_b=0.0, converged=True, iterations=0,
        )
        assert np.allclose(inc.predict_pi(fit, Z, V), 0.5)

    def test_intercept_only(self):
        Z = np.ones((9, 1))
        fit = inc.IncidenceFit(
            b=np.array([logit(0.37)]), theta_b=np.array([]),
            lambda_b=0.0, converged=True, iterations=0,
        )
        assert np.allclose(inc.predict_pi(fit, Z, None), 0.37)
