# =============================================================================
# =============================================================================
# B-spline bases on regular knot grids and difference penalties
# =============================================================================
# =============================================================================
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline


@dataclass(frozen=True)
class KnotGrid(object):
    """
    A regular grid of knots for a B-spline basis.

    Parameters
    ----------
    domain_lo : float
        Left end of the domain (time units).
    domain_hi : float
        Right end of the domain.
    n_segments : integer
        The number of equally spaced segments between ``domain_lo`` and
        ``domain_hi``.
    degree : integer
        The degree of the B-splines. Default is cubic.
    """
    domain_lo: float
    domain_hi: float
    n_segments: int
    degree: int = 3

    def __post_init__(self):
        if not (np.isfinite(self.domain_lo) and np.isfinite(self.domain_hi)):
            raise ValueError("knot grid domain must be finite")
        if not self.domain_lo < self.domain_hi:
            raise ValueError(f"domain_lo ({self.domain_lo}) must be smaller "
                             f"than domain_hi ({self.domain_hi})")
        if int(self.n_segments) != self.n_segments or self.n_segments < 1:
            raise ValueError("n_segments must be a positive integer")
        if int(self.degree) != self.degree or self.degree < 0:
            raise ValueError("degree must be a non-negative integer")

    @property
    def spacing(self):
        return (self.domain_hi - self.domain_lo) / self.n_segments

    @property
    def n_basis(self):
        """The number of B-splines, ``n_segments + degree``."""
        return self.n_segments + self.degree

    @property
    def knots(self):
        """
        The full knot vector: the domain knots plus ``degree`` knots
        appended on each side at the same spacing.
        """
        k = np.arange(-self.degree, self.n_segments + self.degree + 1)
        knots = self.domain_lo + k * self.spacing
        # pin the domain ends so they are exact knots
        knots[self.degree] = self.domain_lo
        knots[self.degree + self.n_segments] = self.domain_hi
        return knots


@dataclass(frozen=True, eq=False)
class BasisMatrix(object):
    """
    B-splines of a ``KnotGrid`` evaluated at a set of points.

    ``values[j, l]`` is the l-th B-spline at ``points[j]``.
    """
    values: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)
    grid: KnotGrid

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_basis(self):
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class DifferenceMatrix(object):
    """
    The ``(c - order) x c`` matrix of differences of a given order.
    """
    order: int
    values: np.ndarray = field(repr=False)

    @property
    def penalty(self):
        """The penalty matrix ``D'D``."""
        return self.values.T @ self.values


def build_basis(grid, points):
    """
    Evaluates all B-splines of ``grid`` at ``points``.

    Points outside ``[domain_lo, domain_hi]`` get the polynomial
    continuation of the splines of the first or last segment, so rows
    still sum to one and extrapolated surfaces stay smooth.

    Parameters
    ----------
    grid : KnotGrid
        The knot grid.
    points : array_like
        Evaluation abscissae.

    Returns
    -------
    basis : BasisMatrix
        A matrix with one row per point and ``grid.n_basis`` columns.
    """
    points = np.atleast_1d(np.asarray(points, dtype=float))
    if points.ndim != 1:
        raise ValueError("points must be a one dimensional array")
    bad = np.flatnonzero(~np.isfinite(points))
    if len(bad) > 0:
        raise ValueError(f"non-finite evaluation point at index {bad[0]}")

    c = grid.n_basis
    # one spline per unit coefficient vector
    splines = BSpline(grid.knots, np.eye(c), grid.degree, extrapolate=True)
    values = splines(points)
    if points.size == 0:
        values = np.zeros((0, c))

    # exact zeros outside the local support, as the recursion would give
    inside = (points >= grid.domain_lo) & (points <= grid.domain_hi)
    values[inside] = np.where(values[inside] < 0.0, 0.0, values[inside])

    return BasisMatrix(values=values, points=points, grid=grid)


def build_difference_matrix(c, d=2):
    """
    Returns the matrix ``D_d`` of differences of order ``d`` for ``c``
    coefficients.

    Parameters
    ----------
    c : integer
        The number of coefficients (basis size).
    d : integer
        The order of the differences. Default is 2.

    Returns
    -------
    difference : DifferenceMatrix
        Integer matrix of shape ``(c - d, c)``.
    """
    if d < 1:
        raise ValueError("penalty order must be a positive integer")
    if d >= c:
        raise ValueError("penalty order too high for basis size")

    values = np.diff(np.eye(c, dtype=np.int64), n=d, axis=0)
    return DifferenceMatrix(order=d, values=values)
