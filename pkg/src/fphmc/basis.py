"""B-spline bases, difference penalties and functional design matrices.

Everything here is a pure function of its inputs; the returned arrays are
treated as immutable and shared freely between the incidence and latency
submodels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline


@dataclass(frozen=True)
class Grid:
    """Ordered observation points s_1 < ... < s_m inside [0, 1]."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 4:
            raise ValueError("grid needs at least 4 points")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if pts[0] < 0.0 or pts[-1] > 1.0:
            raise ValueError("grid points must lie in [0, 1]")
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return self.points.size


@dataclass(frozen=True)
class BasisMatrix:
    """B-spline basis evaluated on a grid; rows form a partition of unity."""

    values: np.ndarray  # (m, K)
    knots: np.ndarray
    degree: int
    grid: Grid

    @property
    def K(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PenaltyMatrix:
    """Symmetric PSD penalty D with theta' D theta = sum of squared differences."""

    D: np.ndarray  # (K, K)
    order: int

    @property
    def K(self) -> int:
        return self.D.shape[0]


@dataclass(frozen=True)
class FunctionalCovariate:
    """Per-subject curves observed on a shared grid, one row per subject."""

    grid: Grid
    values: np.ndarray  # (n, m)

    def __post_init__(self):
        vals = np.atleast_2d(np.asarray(self.values, dtype=float))
        if vals.shape[1] != self.grid.m:
            raise ValueError(
                f"curve values have {vals.shape[1]} columns, grid has {self.grid.m} points"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("curve values must be finite (sparse/missing curves rejected)")
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def make_grid(m: int) -> Grid:
    """Equally spaced grid of m points covering [0, 1]."""
    if m < 4:
        raise ValueError("m must be at least 4")
    return Grid(np.linspace(0.0, 1.0, m))


def bspline_knots(K: int, degree: int) -> np.ndarray:
    """Open knot vector on [0, 1] with equally spaced interior knots."""
    if degree < 1:
        raise ValueError("degree must be at least 1")
    if K < degree + 1:
        raise ValueError("K must be at least degree + 1")
    inner = np.linspace(0.0, 1.0, K - degree + 1)
    return np.concatenate([np.zeros(degree), inner, np.ones(degree)])


def bspline_basis(grid: Grid, K: int = 10, degree: int = 3) -> BasisMatrix:
    """Evaluate K B-spline basis functions of the given degree on the grid."""
    knots = bspline_knots(K, degree)
    values = BSpline.design_matrix(grid.points, knots, degree, extrapolate=False).toarray()
    return BasisMatrix(values=values, knots=knots, degree=degree, grid=grid)


def difference_penalty(K: int, order: int = 2) -> PenaltyMatrix:
    """P-spline penalty D = Delta' Delta built from order-th coefficient differences."""
    if order < 1:
        raise ValueError("order must be at least 1")
    if K <= order:
        raise ValueError("K must exceed the penalty order")
    delta = np.diff(np.eye(K), n=order, axis=0)
    return PenaltyMatrix(D=delta.T @ delta, order=order)


def quadrature_weights(grid: Grid) -> np.ndarray:
    """Trapezoid-rule weights on the grid; exact for piecewise-linear integrands."""
    pts = grid.points
    w = np.zeros(pts.size)
    gaps = np.diff(pts)
    w[:-1] += gaps / 2.0
    w[1:] += gaps / 2.0
    return w


def functional_design(
    curves: FunctionalCovariate, basis: BasisMatrix, weights: np.ndarray
) -> np.ndarray:
    """Numerical integrals V[i, k] = sum_j weights_j * x_i(s_j) * B_k(s_j)."""
    if curves.grid.m != basis.grid.m or not np.allclose(
        curves.grid.points, basis.grid.points
    ):
        raise ValueError("curve grid does not match the basis grid")
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (curves.grid.m,):
        raise ValueError("quadrature weights do not match the grid")
    return (curves.values * weights) @ basis.values
