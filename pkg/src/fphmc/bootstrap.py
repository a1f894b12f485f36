"""Subject-level bootstrap for standard errors and pointwise bands."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import em
from .errors import (
    BootstrapUnstableError,
    ConvergenceError,
    DegenerateRiskSetError,
    InsufficientReplicatesError,
)

MIN_REPLICATES = 20
MAX_FAILURE_FRACTION = 0.2


def _resample_indices(seed: int, rep: int, n: int) -> np.ndarray:
    """With-replacement subject draw from the (seed, replicate) stream."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, rep]))
    return rng.integers(0, n, size=n)


@dataclass
class BootstrapResult:
    """Per-replicate coefficient snapshots from refits on resampled subjects."""

    snapshots: dict  # name -> (B_success, ...) array
    failures: int
    requested: int
    seed: int
    time_grid: np.ndarray

    @property
    def successes(self) -> int:
        first = next(iter(self.snapshots.values()))
        return first.shape[0]


def _snapshot(fit: em.FphmcFit, time_grid):
    snap = {
        "beta": fit.latency.beta,
        "theta_beta": fit.latency.theta_beta,
        "baseline": fit.baseline.survival(time_grid),
    }
    if fit.designs.basis_x is not None:
        snap["beta_curve"] = em.coefficient_curve(fit.latency.theta_beta, fit.designs.basis_x)
    if fit.incidence is not None:
        snap["b"] = fit.incidence.b
        snap["theta_b"] = fit.incidence.theta_b
        if fit.designs.basis_z is not None:
            snap["b_curve"] = em.coefficient_curve(fit.incidence.theta_b, fit.designs.basis_z)
    return snap


def bootstrap_fit(
    dataset: em.SurvivalDataset,
    config: em.FitConfig,
    B: int,
    seed: int,
    *,
    designs: em.PreparedDesigns | None = None,
    time_grid=None,
    fit: em.FphmcFit | None = None,
) -> BootstrapResult:
    """Refit on B with-replacement subject resamples.

    Each replicate draws its indices from an independent stream derived from
    ``(seed, replicate index)``, so any subset of replicates recomputed in
    isolation matches the full run.  Smoothing parameters are frozen at the
    values selected on the original dataset (fitting it first if ``fit`` is
    not supplied), so replicates only re-estimate coefficients.  Replicates
    whose EM fit fails are counted; more than 20% failures raises
    ``BootstrapUnstableError`` with the partial result attached.
    """
    if B < 1:
        raise ValueError("B must be at least 1")
    if designs is None:
        designs = em.prepare_designs(dataset, config)
    if config.lambda_b is None or config.lambda_beta is None:
        if fit is None:
            fit = em.fit_fphmc(dataset, config, designs=designs)
        config = replace(
            config,
            lambda_b=None if fit.incidence is None else fit.incidence.lambda_b,
            lambda_beta=fit.latency.lambda_beta,
        )
    if time_grid is None:
        tail = float(np.max(dataset.time[dataset.event == 1]))
        time_grid = np.linspace(0.0, tail, 101)
    time_grid = np.asarray(time_grid, dtype=float)

    n = dataset.n
    collected = None
    failures = 0
    for rep in range(B):
        idx = _resample_indices(seed, rep, n)
        sub = dataset.subset(idx)
        try:
            fit = em.fit_fphmc(sub, config, designs=designs.subset(idx))
        except (ConvergenceError, DegenerateRiskSetError, ValueError):
            failures += 1
            continue
        snap = _snapshot(fit, time_grid)
        if collected is None:
            collected = {k: [] for k in snap}
        for k, v in snap.items():
            collected[k].append(v)

    if collected is None:
        collected = {"beta": []}
    snapshots = {k: np.array(v) for k, v in collected.items()}
    result = BootstrapResult(
        snapshots=snapshots,
        failures=failures,
        requested=B,
        seed=seed,
        time_grid=time_grid,
    )
    if failures > MAX_FAILURE_FRACTION * B:
        raise BootstrapUnstableError(
            f"{failures}/{B} bootstrap replicates failed", partial=result
        )
    return result


def pointwise_ci(result: BootstrapResult, level: float = 0.95) -> dict:
    """Empirical percentile intervals per parameter and grid point.

    Returns a dict mapping each snapshot name to ``(lower, upper)`` arrays.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    first = next(iter(result.snapshots.values()))
    if first.shape[0] < MIN_REPLICATES:
        raise InsufficientReplicatesError(
            f"need at least {MIN_REPLICATES} successful replicates, have {first.shape[0]}"
        )
    alpha = (1.0 - level) / 2.0
    bands = {}
    for name, reps in result.snapshots.items():
        lower = np.quantile(reps, alpha, axis=0)
        upper = np.quantile(reps, 1.0 - alpha, axis=0)
        bands[name] = (lower, upper)
    return bands
