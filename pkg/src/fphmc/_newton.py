"""Damped Newton ascent shared by the incidence and latency M-steps."""

from __future__ import annotations

import numpy as np
from scipy import linalg


def newton_maximize(
    objective,
    x0,
    *,
    max_iter: int = 100,
    grad_tol: float = 1e-8,
    max_halvings: int = 30,
    coef_cap: float | None = None,
    accepted_values: list | None = None,
):
    """Maximize a smooth objective by Newton steps with step halving.

    ``objective(x)`` must return ``(value, gradient, hessian)`` of the function
    being maximized.  A step is halved (up to ``max_halvings`` times) whenever
    it decreases the objective.  If ``coef_cap`` is set and any coefficient
    exceeds it in absolute value, coefficients are clamped and the ``flagged``
    indicator is returned true (divergence guard for separated logistic fits).

    Returns ``(x, value, converged, iterations, flagged)``.
    """
    x = np.asarray(x0, dtype=float).copy()
    value, grad, hess = objective(x)
    if accepted_values is not None:
        accepted_values.append(value)
    flagged = False
    iterations = 0
    converged = bool(np.linalg.norm(grad) < grad_tol * (1.0 + abs(value)))

    for iterations in range(1, max_iter + 1):
        if converged:
            iterations -= 1
            break
        step = _solve_step(hess, grad)
        scale = 1.0
        accepted = False
        # slack absorbs float rounding in the objective near the optimum
        slack = 1e-10 * (1.0 + abs(value))
        for _ in range(max_halvings + 1):
            cand = x + scale * step
            cand_value, cand_grad, cand_hess = objective(cand)
            if np.isfinite(cand_value) and cand_value >= value - slack:
                x, value, grad, hess = cand, cand_value, cand_grad, cand_hess
                accepted = True
                if accepted_values is not None:
                    accepted_values.append(value)
                break
            scale /= 2.0
        if not accepted:
            break
        if coef_cap is not None and np.any(np.abs(x) > coef_cap):
            x = np.clip(x, -coef_cap, coef_cap)
            value, grad, hess = objective(x)
            flagged = True
            break
        converged = bool(np.linalg.norm(grad) < grad_tol * (1.0 + abs(value)))

    converged = bool(np.linalg.norm(grad) < grad_tol * (1.0 + abs(value)))
    return x, value, converged, iterations, flagged


def _solve_step(hess, grad):
    """Newton ascent direction solve(-H, g), with a ridge fallback."""
    neg_hess = -hess
    try:
        c, low = linalg.cho_factor(neg_hess)
        return linalg.cho_solve((c, low), grad)
    except linalg.LinAlgError:
        p = neg_hess.shape[0]
        ridge = 1e-8 * (1.0 + np.trace(neg_hess) / p)
        return np.linalg.solve(neg_hess + ridge * np.eye(p), grad)
