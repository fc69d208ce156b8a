"""
Smooth hazard over a single time scale.

The log-hazard is a P-spline, ``eta = B alpha``, and events per bin are
Poisson with mean ``mu = r * exp(eta)``. Coefficients maximize the
Poisson likelihood penalized by ``rho * |D alpha|^2``.
"""
import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from pytwoscale.lexis.binning import BinnedData1D
from pytwoscale.splines.basis import build_basis, build_difference_matrix
from pytwoscale.utils.errors import FitError
from pytwoscale.utils.iwls import (IWLSControl, cholesky, effective_dimension,
                                   full_poisson_deviance, iwls,
                                   poisson_deviance, solve)

logger = logging.getLogger(__name__)

DEFAULT_LOG10_RHO_GRID = np.round(np.linspace(-2.0, 6.0, 41), 10)

# guards empty bins in the starting values
_EPS = 1e-10


@dataclass(eq=False)
class Fit1DResult(object):
    """
    A fitted one dimensional hazard.

    Attributes
    ----------
    alpha : numpy array
        B-spline coefficients.
    rho : float
        Smoothing parameter.
    eta_hat : numpy array
        Fitted log-hazard at the bin midpoints.
    mu_hat : numpy array
        Fitted expected events per bin.
    aic, deviance, ed : float
        ``AIC = deviance + 2 ED``.
    cov_alpha : numpy array
        ``(B'WB + rho D'D)^{-1}``.
    converged : boolean
    iterations : integer
    knots : KnotGrid
    order : integer
        The penalty order.
    support : tuple of floats
        Range of ``s`` with positive exposure.
    on_boundary : boolean
        Set by ``select_rho_1d`` when the selected rho is at the end of the
        grid.
    """
    alpha: np.ndarray = field(repr=False)
    rho: float
    eta_hat: np.ndarray = field(repr=False)
    mu_hat: np.ndarray = field(repr=False)
    aic: float
    deviance: float
    ed: float
    cov_alpha: np.ndarray = field(repr=False)
    converged: bool
    iterations: int
    knots: object = field(repr=False)
    order: int = 2
    support: tuple = (np.nan, np.nan)
    on_boundary: bool = False

    @property
    def lambda_hat(self):
        return np.exp(self.eta_hat)

    def summary(self):
        """The fit statistics as a dictionary of plain Python values."""
        return {'rho': float(self.rho),
                'log10_rho': float(np.log10(self.rho)),
                'aic': float(self.aic),
                'deviance': float(self.deviance),
                'ed': float(self.ed),
                'n_coefficients': int(len(self.alpha)),
                'penalty_order': int(self.order),
                'converged': bool(self.converged),
                'iterations': int(self.iterations),
                'rho_on_grid_boundary': bool(self.on_boundary)}


class PoissonModel1D(object):
    """
    The penalized Poisson regression of ``y`` on ``B`` with offset
    exposures ``r``.
    """

    def __init__(self, B, y, r, D, rho):
        self.B = B
        self.y = y
        self.r = r
        self.D = D
        self.rho = rho
        self.P = rho * D.T @ D

    def mu(self, alpha):
        with np.errstate(over='ignore'):
            return self.r * np.exp(self.B @ alpha)

    def objective(self, alpha):
        mu = self.mu(alpha)
        if not np.all(np.isfinite(mu)):
            return np.inf
        return (full_poisson_deviance(self.y, mu) +
                self.rho * np.sum((self.D @ alpha) ** 2))

    def normal_matrix(self, alpha):
        mu = self.mu(alpha)
        return self.B.T @ (mu[:, None] * self.B), mu

    def update(self, alpha):
        G0, mu = self.normal_matrix(alpha)
        rhs = G0 @ alpha + self.B.T @ (self.y - mu)
        return solve(cholesky(G0 + self.P), rhs)


def _check_data(y, r):
    if y.sum() <= 0:
        raise FitError("no events to fit")
    stranded = np.flatnonzero((y > 0) & (r <= 0))
    if len(stranded) > 0:
        raise FitError(f"{len(stranded)} bin(s) have events but no exposure "
                       f"(first at bin {stranded[0]})")


def _support(r, breaks):
    exposed = np.flatnonzero(r > 0)
    if len(exposed) == 0:
        return (np.nan, np.nan)
    return (float(breaks[exposed[0]]), float(breaks[exposed[-1] + 1]))


def starting_values(B, y, r, P):
    """
    Penalized least squares projection of the log raw rates onto the
    basis, using only bins with exposure.
    """
    eta0 = np.log((y + 0.5) / (r + _EPS))
    w = (r > 0).astype(float)
    G = B.T @ (w[:, None] * B) + P + 1e-8 * np.eye(B.shape[1])
    return solve(cholesky(G, "starting value system"), B.T @ (w * eta0))


def fit_1d(data, grid, d=2, rho=100.0, control=None, start=None):
    """
    Fits a smooth one dimensional hazard by penalized Poisson IWLS.

    Parameters
    ----------
    data : BinnedData1D
        Events and exposures per bin.
    grid : KnotGrid
        Knot grid of the B-spline basis.
    d : integer
        Penalty order. Default is 2.
    rho : float
        Smoothing parameter, positive.
    control : IWLSControl, optional
    start : numpy array, optional
        Starting coefficients (warm start).

    Returns
    -------
    fit : Fit1DResult
    """
    if not isinstance(data, BinnedData1D):
        raise TypeError("fit_1d needs BinnedData1D")
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    if control is None:
        control = IWLSControl()

    y = np.asarray(data.y, dtype=float)
    r = np.asarray(data.r, dtype=float)
    _check_data(y, r)

    B = build_basis(grid, data.grid.s.midpoints).values
    D = build_difference_matrix(grid.n_basis, d)
    model = PoissonModel1D(B, y, r, D.values, rho)
    P = model.P

    if start is None:
        start = starting_values(B, y, r, P)
    trace = iwls(model, start, control)
    alpha = trace.theta

    G0, mu = model.normal_matrix(alpha)
    factor = cholesky(G0 + P)
    ed = effective_dimension(factor, G0)
    cov_alpha = solve(factor, np.eye(len(alpha)))
    dev = poisson_deviance(y, mu)

    logger.debug("fit_1d rho=%g: AIC %.4f, ED %.3f, %d iterations",
                 rho, dev + 2 * ed, ed, trace.iterations)
    return Fit1DResult(alpha=alpha,
                       rho=float(rho),
                       eta_hat=B @ alpha,
                       mu_hat=mu,
                       aic=dev + 2 * ed,
                       deviance=dev,
                       ed=ed,
                       cov_alpha=(cov_alpha + cov_alpha.T) / 2,
                       converged=trace.converged,
                       iterations=trace.iterations,
                       knots=grid,
                       order=d,
                       support=_support(r, data.grid.s.breaks))


def select_rho_1d(data, grid, d=2, log10_rho_grid=None, control=None,
                  warm_start=None, threads=1):
    """
    Chooses the smoothing parameter by minimizing AIC over a grid.

    Parameters
    ----------
    data : BinnedData1D
    grid : KnotGrid
    d : integer
        Penalty order.
    log10_rho_grid : array_like, optional
        Values of ``log10(rho)``. Default is -2 to 6 in steps of 0.2.
    control : IWLSControl, optional
    warm_start : boolean, optional
        Start each fit from the coefficients of the previous one. Fits run
        in grid order when set. Default: on for a single thread, off
        otherwise.
    threads : integer
        Worker threads when ``warm_start`` is off.

    Returns
    -------
    fit : Fit1DResult
        The fit with the smallest AIC; ties go to the larger rho.
    profile : pandas DataFrame
        Columns ``log10_rho, aic, ed, deviance, converged``.
    """
    if log10_rho_grid is None:
        log10_rho_grid = DEFAULT_LOG10_RHO_GRID
    log10_rho_grid = np.asarray(log10_rho_grid, dtype=float)
    if log10_rho_grid.size == 0 or not np.all(np.isfinite(log10_rho_grid)):
        raise ValueError("log10 rho grid must be non-empty and finite")

    if warm_start is None:
        warm_start = threads <= 1
    elif warm_start and threads > 1:
        logger.info("warm starts run the rho grid in order; %d threads "
                    "unused", threads)

    if warm_start or threads <= 1:
        fits = []
        start = None
        for lr in log10_rho_grid:
            fit = fit_1d(data, grid, d, 10.0 ** lr, control, start)
            fits.append(fit)
            if warm_start:
                start = fit.alpha
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fits = list(pool.map(
                lambda lr: fit_1d(data, grid, d, 10.0 ** lr, control),
                log10_rho_grid))

    profile = pd.DataFrame({'log10_rho': log10_rho_grid,
                            'aic': [f.aic for f in fits],
                            'ed': [f.ed for f in fits],
                            'deviance': [f.deviance for f in fits],
                            'converged': [f.converged for f in fits]})

    aic = profile['aic'].to_numpy()
    ties = np.flatnonzero(aic == aic.min())
    best = ties[np.argmax(log10_rho_grid[ties])]
    on_boundary = log10_rho_grid[best] in (log10_rho_grid.min(),
                                           log10_rho_grid.max())
    if on_boundary:
        logger.warning("AIC minimum at the end of the rho grid "
                       "(log10 rho = %g)", log10_rho_grid[best])
    logger.info("selected log10 rho = %g (AIC %.4f, ED %.3f)",
                log10_rho_grid[best], aic[best], fits[best].ed)
    fit = dataclasses.replace(fits[best], on_boundary=bool(on_boundary))
    return fit, profile


def predict_1d(fit, grid=None, times=None, rate_scale=1.0):
    """
    Evaluates a fitted hazard at arbitrary times.

    Parameters
    ----------
    fit : Fit1DResult
    grid : KnotGrid, optional
        The knot grid of the fit. Default is ``fit.knots``.
    times : array_like
        Evaluation times; extrapolation is allowed and flagged.
    rate_scale : float
        Multiplies the hazard columns, e.g. 365.25 for per-year rates from
        daily data.

    Returns
    -------
    prediction : pandas DataFrame
        Columns ``time, eta, lambda, se_eta, se_lambda, lambda_lo,
        lambda_hi, extrapolated``. The band is ``exp(eta +/- 2 se)``.
    """
    if grid is None:
        grid = fit.knots
    times = np.atleast_1d(np.asarray(times, dtype=float))
    B = build_basis(grid, times).values
    eta = B @ fit.alpha
    var = np.einsum('ij,jk,ik->i', B, fit.cov_alpha, B)
    se = np.sqrt(np.clip(var, 0.0, None))
    lam = np.exp(eta)
    lo, hi = fit.support
    extrapolated = (times < lo) | (times > hi)
    if np.any(extrapolated):
        logger.info("%d prediction time(s) outside the data range "
                    "[%g, %g]", int(extrapolated.sum()), lo, hi)
    return pd.DataFrame({'time': times,
                         'eta': eta,
                         'lambda': rate_scale * lam,
                         'se_eta': se,
                         'se_lambda': rate_scale * lam * se,
                         'lambda_lo': rate_scale * np.exp(eta - 2 * se),
                         'lambda_hi': rate_scale * np.exp(eta + 2 * se),
                         'extrapolated': extrapolated})
