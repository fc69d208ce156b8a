"""
Smooth hazard over two time scales.

The log-hazard on the ``(u, s)`` grid is a tensor-product P-spline,
``E = Bu A Bs'``, with separate difference penalties along ``u`` and
``s``. All products with the tensor basis go through the GLAM kernels in
``pytwoscale.utils.glam``.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import pandas as pd

from pytwoscale.lexis.binning import BinnedData2D
from pytwoscale.lexis.records import transform_ts_to_us
from pytwoscale.splines.basis import build_basis, build_difference_matrix
from pytwoscale.utils import glam
from pytwoscale.utils.errors import FitError
from pytwoscale.utils.iwls import (IWLSControl, cholesky, effective_dimension,
                                   full_poisson_deviance, iwls,
                                   poisson_deviance, solve)
from pytwoscale.utils.smoothing import search_smoothing

logger = logging.getLogger(__name__)

_EPS = 1e-10


@dataclass(frozen=True)
class Penalty2D(object):
    """
    Anisotropic difference penalty
    ``P = rho_u (I_s kron Du'Du) + rho_s (Ds'Ds kron I_u)``.
    """
    rho_u: float
    rho_s: float
    d_u: int = 2
    d_s: int = 2

    def __post_init__(self):
        if not (self.rho_u > 0 and self.rho_s > 0):
            raise ValueError("smoothing parameters must be positive, got "
                             f"rho_u={self.rho_u}, rho_s={self.rho_s}")

    @classmethod
    def from_log10(cls, log10_rhos, orders=(2, 2)):
        return cls(rho_u=10.0 ** log10_rhos[0], rho_s=10.0 ** log10_rhos[1],
                   d_u=orders[0], d_s=orders[1])

    @property
    def log10(self):
        return (float(np.log10(self.rho_u)), float(np.log10(self.rho_s)))

    def matrix(self, c_u, c_s):
        Pu = build_difference_matrix(c_u, self.d_u).penalty
        Ps = build_difference_matrix(c_s, self.d_s).penalty
        return (self.rho_u * np.kron(np.eye(c_s), Pu) +
                self.rho_s * np.kron(Ps, np.eye(c_u)))

    def value(self, A):
        """
        ``vec(A)' P vec(A)`` as sums of squared differences, which keeps
        round-off small when the rhos are large.
        """
        c_u, c_s = A.shape
        Du = build_difference_matrix(c_u, self.d_u).values
        Ds = build_difference_matrix(c_s, self.d_s).values
        return (self.rho_u * np.sum((Du @ A) ** 2) +
                self.rho_s * np.sum((A @ Ds.T) ** 2))


@dataclass(eq=False)
class Fit2DResult(object):
    """
    A fitted hazard surface.

    Attributes
    ----------
    A : numpy array, ``c_u x c_s``
        Coefficients.
    penalty : Penalty2D
    eta_hat, mu_hat : numpy arrays, ``n_u x n_s``
        Fitted log-hazard and expected events at the bin midpoints.
    aic, deviance, ed : float
    factor : tuple
        Cholesky factor of ``G = B'WB + P``; ``cov_alpha`` is its inverse.
    converged : boolean
    iterations : integer
    knots : tuple of KnotGrid
        ``(knots_u, knots_s)``.
    bins : BinGrid
        The bin grid of the data.
    u_max : float
        Upper edge of the last u-bin with exposure.
    s_last : numpy array
        Upper edge of the last exposed s-bin in each u-bin (0 if none).
    on_boundary : boolean
        Set by ``select_rho_2d``.
    """
    A: np.ndarray = field(repr=False)
    penalty: Penalty2D
    eta_hat: np.ndarray = field(repr=False)
    mu_hat: np.ndarray = field(repr=False)
    aic: float
    deviance: float
    ed: float
    factor: tuple = field(repr=False)
    converged: bool
    iterations: int
    knots: tuple = field(repr=False)
    bins: object = field(repr=False)
    u_max: float = np.nan
    s_last: np.ndarray = field(default=None, repr=False)
    on_boundary: bool = False

    @property
    def theta(self):
        return glam.vec(self.A)

    @cached_property
    def cov_alpha(self):
        """Covariance of ``vec(A)``, ``G^{-1}``."""
        cov = solve(self.factor, np.eye(self.A.size))
        return (cov + cov.T) / 2

    @property
    def lambda_hat(self):
        return np.exp(self.eta_hat)

    def summary(self):
        log_u, log_s = self.penalty.log10
        return {'rho_u': float(self.penalty.rho_u),
                'rho_s': float(self.penalty.rho_s),
                'log10_rho_u': log_u,
                'log10_rho_s': log_s,
                'penalty_order_u': int(self.penalty.d_u),
                'penalty_order_s': int(self.penalty.d_s),
                'aic': float(self.aic),
                'deviance': float(self.deviance),
                'ed': float(self.ed),
                'n_coefficients': int(self.A.size),
                'converged': bool(self.converged),
                'iterations': int(self.iterations),
                'rho_on_search_boundary': bool(self.on_boundary)}


class PoissonModel2D(object):
    """
    Penalized Poisson regression of the event counts ``Y`` on the tensor
    basis of ``Bu`` and ``Bs`` with exposures ``R``.
    """

    def __init__(self, Bu, Bs, Y, R, penalty):
        self.Bu = Bu
        self.Bs = Bs
        self.Y = Y
        self.R = R
        self.penalty = penalty
        self.P = penalty.matrix(Bu.shape[1], Bs.shape[1])
        self.c_u = Bu.shape[1]
        self.c_s = Bs.shape[1]

    def coefficients(self, theta):
        return glam.unvec(theta, self.c_u, self.c_s)

    def eta(self, theta):
        return glam.linear_predictor_2d(self.Bu, self.coefficients(theta),
                                        self.Bs)

    def mu(self, theta):
        with np.errstate(over='ignore'):
            return self.R * np.exp(self.eta(theta))

    def objective(self, theta):
        mu = self.mu(theta)
        if not np.all(np.isfinite(mu)):
            return np.inf
        return (full_poisson_deviance(self.Y, mu) +
                self.penalty.value(self.coefficients(theta)))

    def update(self, theta):
        E = self.eta(theta)
        M = self.R * np.exp(E)
        G0 = glam.inner_product_2d(self.Bu, self.Bs, M)
        rhs = glam.rhs_2d(self.Bu, self.Bs, self.Y, M, E)
        return solve(cholesky(G0 + self.P), rhs)


def marginal_bases(grids, bins):
    """Marginal bases at the bin midpoints of ``bins``."""
    knots_u, knots_s = grids
    Bu = build_basis(knots_u, bins.u.midpoints).values
    Bs = build_basis(knots_s, bins.s.midpoints).values
    return Bu, Bs


def check_events(Y, R):
    if Y.sum() <= 0:
        raise FitError("no events to fit")
    stranded = np.argwhere((Y > 0) & (R <= 0))
    if len(stranded) > 0:
        raise FitError(f"{len(stranded)} bin(s) have events but no exposure "
                       f"(first at bin {tuple(stranded[0])})")


def starting_values_2d(Bu, Bs, Y, R, P):
    """
    Penalized least squares fit of the log raw rates, weighting only bins
    with exposure.
    """
    H0 = np.log((Y + 0.5) / (R + _EPS))
    W = (R > 0).astype(float)
    G = glam.inner_product_2d(Bu, Bs, W) + P + 1e-8 * np.eye(P.shape[0])
    rhs = glam.vec(Bu.T @ (W * H0) @ Bs)
    return solve(cholesky(G, "starting value system"), rhs)


def exposure_hull(R, bins):
    """
    The observed region of the ``(u, s)`` plane: the upper edge of the
    last u-bin with exposure and, per u-bin, the upper edge of the last
    s-bin with exposure.
    """
    s_breaks = bins.s.breaks
    u_breaks = bins.u.breaks
    exposed = R > 0
    s_last = np.zeros(bins.u.n)
    for j in range(bins.u.n):
        cols = np.flatnonzero(exposed[j])
        if len(cols) > 0:
            s_last[j] = s_breaks[cols[-1] + 1]
    rows = np.flatnonzero(exposed.any(axis=1))
    u_max = float(u_breaks[rows[-1] + 1]) if len(rows) else float(u_breaks[0])
    return u_max, s_last


def fit_2d(data, grids, penalty, control=None, start=None):
    """
    Fits a hazard surface over two time scales by penalized Poisson IWLS.

    Parameters
    ----------
    data : BinnedData2D
        Events ``Y`` and exposures ``R`` on the ``(u, s)`` grid.
    grids : tuple of KnotGrid
        ``(knots_u, knots_s)``.
    penalty : Penalty2D
    control : IWLSControl, optional
    start : numpy array, optional
        Starting ``vec(A)``.

    Returns
    -------
    fit : Fit2DResult
    """
    if not isinstance(data, BinnedData2D):
        raise TypeError("fit_2d needs BinnedData2D")
    if control is None:
        control = IWLSControl()
    Y = np.asarray(data.Y, dtype=float)
    R = np.asarray(data.R, dtype=float)
    check_events(Y, R)

    Bu, Bs = marginal_bases(grids, data.grid)
    model = PoissonModel2D(Bu, Bs, Y, R, penalty)
    P = model.P

    if start is None:
        start = starting_values_2d(Bu, Bs, Y, R, P)
    trace = iwls(model, start, control)
    theta = trace.theta

    E = model.eta(theta)
    M = R * np.exp(E)
    G0 = glam.inner_product_2d(Bu, Bs, M)
    factor = cholesky(G0 + P)
    ed = effective_dimension(factor, G0)
    dev = poisson_deviance(Y, M)
    u_max, s_last = exposure_hull(R, data.grid)

    logger.debug("fit_2d log10 rho=%s: AIC %.4f, ED %.3f, %d iterations",
                 penalty.log10, dev + 2 * ed, ed, trace.iterations)
    return Fit2DResult(A=model.coefficients(theta),
                       penalty=penalty,
                       eta_hat=E,
                       mu_hat=M,
                       aic=dev + 2 * ed,
                       deviance=dev,
                       ed=ed,
                       factor=factor,
                       converged=trace.converged,
                       iterations=trace.iterations,
                       knots=tuple(grids),
                       bins=data.grid,
                       u_max=u_max,
                       s_last=s_last)


def select_rho_2d(data, grids, orders=(2, 2), strategy='numeric',
                  start=(1.0, 1.0), control=None, warm_start=None, **kwargs):
    """
    Chooses ``(rho_u, rho_s)`` by minimizing AIC.

    Parameters
    ----------
    data : BinnedData2D
    grids : tuple of KnotGrid
    orders : tuple of integers
        Penalty orders ``(d_u, d_s)``.
    strategy : string
        ``grid`` (lattice, default -2 to 6 in steps of 0.5) or ``numeric``
        (Nelder-Mead on ``(log10 rho_u, log10 rho_s)``).
    start : tuple of floats
        Starting ``(log10 rho_u, log10 rho_s)`` of the numeric search.
    control : IWLSControl, optional
    warm_start : boolean, optional
        Start each IWLS fit from the previous coefficients. Off by default
        for a grid search on more than one thread.
    **kwargs
        ``lattice``, ``threads``, ``box``, ``max_evals``.

    Returns
    -------
    fit : Fit2DResult
    trace : pandas DataFrame
    """
    def fit_func(log10_rhos, theta0):
        return fit_2d(data, grids, Penalty2D.from_log10(log10_rhos, orders),
                      control, theta0)

    return search_smoothing(fit_func, strategy, warm_start, start=start,
                            **kwargs)


def _points_us(points, coords):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != 2:
        raise ValueError("points must have two columns")
    if coords == 'ts':
        u, s = transform_ts_to_us(points[:, 0], points[:, 1])
    elif coords == 'us':
        u, s = points[:, 0], points[:, 1]
    else:
        raise ValueError(f"coords must be 'us' or 'ts', got {coords!r}")
    return np.asarray(u, dtype=float), np.asarray(s, dtype=float)


def extrapolated(fit, u, s):
    """
    True for points beyond the observed region: ``u`` past the last
    exposed u-bin, or ``s`` past the last exposure in the u-bin of the
    point.
    """
    bins = fit.bins
    j = np.clip(bins.u.locate(u), 0, bins.u.n - 1)
    outside_u = (u < bins.u.origin) | (u > fit.u_max)
    return outside_u | (s < bins.s.origin) | (s > fit.s_last[j])


def predict_2d(fit, grids=None, points=None, coords='us', rate_scale=1.0):
    """
    Evaluates a fitted surface at scattered points.

    Parameters
    ----------
    fit : Fit2DResult
    grids : tuple of KnotGrid, optional
        Default is ``fit.knots``.
    points : array_like, ``n x 2``
        ``(u, s)`` or ``(t, s)`` pairs.
    coords : string
        ``us`` or ``ts``; ``(t, s)`` points need ``t >= s``.
    rate_scale : float
        Multiplies the hazard columns.

    Returns
    -------
    prediction : pandas DataFrame
        Columns ``u, s, t, eta, lambda, se_eta, se_lambda, extrapolated``.
        ``se_eta`` is also the standard error of lambda relative to its
        level.
    """
    if grids is None:
        grids = fit.knots
    u, s = _points_us(points, coords)
    Bu = build_basis(grids[0], u).values
    Bs = build_basis(grids[1], s).values
    C = glam.row_kronecker(Bu, Bs)
    eta = C @ glam.vec(fit.A)
    var = np.einsum('ij,ij->i', C @ fit.cov_alpha, C)
    return _prediction_frame(u, s, eta, var, extrapolated(fit, u, s),
                             rate_scale)


def _prediction_frame(u, s, eta, var, flags, rate_scale):
    se = np.sqrt(np.clip(var, 0.0, None))
    lam = np.exp(eta)
    return pd.DataFrame({'u': u,
                         's': s,
                         't': u + s,
                         'eta': eta,
                         'lambda': rate_scale * lam,
                         'se_eta': se,
                         'se_lambda': rate_scale * lam * se,
                         'extrapolated': flags})


def surface_grid(fit, rate_scale=1.0):
    """
    The fitted surface with standard errors at every bin midpoint, in
    long format (u varies slowest).
    """
    Bu, Bs = marginal_bases(fit.knots, fit.bins)
    var = glam.variance_diag_2d(Bu, Bs, fit.cov_alpha)
    uu, ss = np.meshgrid(fit.bins.u.midpoints, fit.bins.s.midpoints,
                         indexing='ij')
    u, s = uu.ravel(), ss.ravel()
    return _prediction_frame(u, s, fit.eta_hat.ravel(), var.ravel(),
                             extrapolated(fit, u, s), rate_scale)


def cut_surface(fit, grids=None, u_values=(), s_points=None, rate_scale=1.0):
    """
    Cuts the fitted surface along ``s`` at fixed values of ``u``.

    Parameters
    ----------
    fit : Fit2DResult
    grids : tuple of KnotGrid, optional
    u_values : sequence of floats
        Where to cut.
    s_points : array_like, optional
        Points along ``s``. Default is the s-bin midpoints.

    Returns
    -------
    cuts : pandas DataFrame
        As ``predict_2d``, stacked over ``u_values``.
    """
    if s_points is None:
        s_points = fit.bins.s.midpoints
    s_points = np.asarray(s_points, dtype=float)
    frames = []
    for u in u_values:
        pts = np.column_stack([np.full(len(s_points), float(u)), s_points])
        frames.append(predict_2d(fit, grids, pts, 'us', rate_scale))
    if not frames:
        return predict_2d(fit, grids, np.zeros((0, 2)), 'us', rate_scale)
    return pd.concat(frames, ignore_index=True)
