"""Penalized scalar-on-function logistic regression for the cure submodel.

The susceptibility weights produced by the E-step act as fractional Bernoulli
responses; the expected complete log-likelihood is linear in them, so no
integerization is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._newton import newton_maximize
from .basis import PenaltyMatrix
from .errors import ConvergenceError

COEF_CAP = 30.0  # logistic likelihood is flat beyond this scale


@dataclass
class IncidenceFit:
    b: np.ndarray  # scalar coefficients, intercept first
    theta_b: np.ndarray  # spline coefficients of the functional effect
    lambda_b: float
    converged: bool
    iterations: int
    separation_flagged: bool = False
    edf: float = float("nan")
    value: float = float("nan")


def _sigmoid(eta):
    return 0.5 * (1.0 + np.tanh(0.5 * eta))


def _log_sigmoid(eta):
    # log sigma(eta) = -log(1 + exp(-eta)), stable for both signs
    return -np.logaddexp(0.0, -eta)


def _full_penalty(p_scalar: int, penalty: PenaltyMatrix | None, lam: float, k: int):
    P = np.zeros((p_scalar + k, p_scalar + k))
    if k and penalty is not None and lam > 0.0:
        P[p_scalar:, p_scalar:] = lam * penalty.D
    return P


def incidence_loglik(b, theta_b, Z, V, w, lambda_b, penalty: PenaltyMatrix | None):
    """Penalized fractional-response Bernoulli log-likelihood.

    Returns ``(value, gradient, hessian)`` with the gradient/Hessian taken
    with respect to the concatenated coefficients ``(b, theta_b)``.
    """
    w = np.asarray(w, dtype=float)
    if np.any(w < 0.0) or np.any(w > 1.0):
        raise ValueError("weights must lie in [0, 1]")
    b = np.asarray(b, dtype=float)
    theta_b = np.asarray(theta_b, dtype=float)
    X = _design(Z, V)
    coefs = np.concatenate([b, theta_b])
    eta = X @ coefs
    value = float(np.sum(w * _log_sigmoid(eta) + (1.0 - w) * _log_sigmoid(-eta)))
    pi = _sigmoid(eta)
    P = _full_penalty(b.size, penalty, lambda_b, theta_b.size)
    value -= 0.5 * coefs @ P @ coefs
    grad = X.T @ (w - pi) - P @ coefs
    s = pi * (1.0 - pi)
    hess = -(X.T * s) @ X - P
    return value, grad, hess


def _design(Z, V):
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if V is None or np.size(V) == 0:
        return Z
    V = np.atleast_2d(np.asarray(V, dtype=float))
    return np.hstack([Z, V])


def fit_incidence(
    Z,
    V,
    w,
    penalty: PenaltyMatrix | None,
    lambda_b: float,
    *,
    max_iter: int = 100,
    init: np.ndarray | None = None,
) -> IncidenceFit:
    """Fit the penalized logistic cure submodel by damped Newton (IRLS)."""
    if lambda_b < 0.0:
        raise ValueError("lambda_b must be nonnegative")
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    p = Z.shape[1]
    k = 0 if V is None or np.size(V) == 0 else np.atleast_2d(V).shape[1]
    if Z.shape[0] < p:
        raise ValueError("need at least as many subjects as scalar coefficients")

    def objective(coefs):
        return incidence_loglik(coefs[:p], coefs[p:], Z, V, w, lambda_b, penalty)

    x0 = np.zeros(p + k) if init is None else np.asarray(init, dtype=float)
    coefs, value, converged, iterations, flagged = newton_maximize(
        objective, x0, max_iter=max_iter, coef_cap=COEF_CAP
    )
    fit = IncidenceFit(
        b=coefs[:p],
        theta_b=coefs[p:],
        lambda_b=float(lambda_b),
        converged=converged or flagged,
        iterations=iterations,
        separation_flagged=flagged,
        value=value,
    )
    fit.edf = _edf(coefs, Z, V, penalty, lambda_b, p, k)
    if not fit.converged:
        raise ConvergenceError(
            f"incidence fit did not converge in {max_iter} iterations", last_iterate=fit
        )
    return fit


def _edf(coefs, Z, V, penalty, lambda_b, p, k):
    """Trace of the IRLS hat matrix: tr((X'SX + P)^-1 X'SX)."""
    X = _design(Z, V)
    pi = _sigmoid(X @ coefs)
    s = pi * (1.0 - pi)
    A = (X.T * s) @ X
    P = _full_penalty(p, penalty, lambda_b, k)
    try:
        return float(np.trace(np.linalg.solve(A + P, A)))
    except np.linalg.LinAlgError:
        return float(np.trace(np.linalg.lstsq(A + P, A, rcond=None)[0]))


def _deviance(pi, w):
    """Fractional-response binomial deviance against the saturated model."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(w > 0.0, w * np.log(w / pi), 0.0)
        t2 = np.where(w < 1.0, (1.0 - w) * np.log((1.0 - w) / (1.0 - pi)), 0.0)
    return 2.0 * float(np.sum(t1 + t2))


def select_lambda_incidence(Z, V, w, penalty, lambda_grid, *, max_iter: int = 100):
    """Pick the smoothing parameter minimizing GCV = n*Dev / (n - edf)^2.

    Ties (within relative 1e-9) go to the largest candidate, so a signal-free
    fit selects the smoothest model.
    """
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    if lambda_grid.size == 0:
        raise ValueError("candidate grid must be nonempty")
    n = np.atleast_2d(Z).shape[0]
    scores = []
    for lam in lambda_grid:
        try:
            fit = fit_incidence(Z, V, w, penalty, lam, max_iter=max_iter)
        except ConvergenceError:
            scores.append(np.inf)
            continue
        pi = predict_pi(fit, Z, V)
        dev = _deviance(pi, np.asarray(w, dtype=float))
        denom = max(n - fit.edf, 1e-8)
        scores.append(n * dev / denom**2)
    scores = np.asarray(scores)
    if not np.any(np.isfinite(scores)):
        raise ConvergenceError("no smoothing candidate converged")
    best = np.min(scores[np.isfinite(scores)])
    tol = 1e-9 * (1.0 + abs(best))
    tied = np.where(scores <= best + tol)[0]
    return float(lambda_grid[tied[np.argmax(lambda_grid[tied])]])


def predict_pi(fit: IncidenceFit, Z, V) -> np.ndarray:
    """Susceptibility probabilities on the logit scale of the fitted model."""
    X = _design(Z, V)
    return _sigmoid(X @ np.concatenate([fit.b, fit.theta_b]))
