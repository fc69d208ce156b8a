"""
Proportional hazards regression with a baseline over two time scales.

The hazard of individual ``i`` is ``lambda0(u, s) exp(x_i' beta)`` with a
tensor-product P-spline baseline. Only the baseline coefficients are
penalized. The normal equations are assembled block by block,

    G = [[G11, G12],
         [G12', G22]]

from sums over individuals of ``n_u x n_s`` arrays, so the
``n n_u n_s``-row regression matrix is never built, and solved by
eliminating the baseline block (Schur complement on beta).
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import linalg, stats

from pytwoscale.hazard.fit2d import (Penalty2D, _points_us,
                                     _prediction_frame, check_events,
                                     exposure_hull, extrapolated, fit_2d,
                                     marginal_bases)
from pytwoscale.lexis.binning import BinnedData3D
from pytwoscale.splines.basis import build_basis
from pytwoscale.utils import glam
from pytwoscale.utils.errors import CollinearityError, FitError
from pytwoscale.utils.iwls import (IWLSControl, cholesky,
                                   full_poisson_deviance, iwls,
                                   poisson_deviance, solve)
from pytwoscale.utils.smoothing import search_smoothing

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class PHFitResult(object):
    """
    A fitted proportional hazards model.

    Attributes
    ----------
    A : numpy array, ``c_u x c_s``
        Baseline coefficients.
    beta, se_beta : numpy arrays of length ``p``
    penalty : Penalty2D
    aic, deviance : float
    ed_baseline, ed_total : float
        ``ed_total = ed_baseline + p``.
    cov_theta : numpy array
        Covariance of ``theta = [vec(A), beta]``.
    converged : boolean
    iterations : integer
    knots : tuple of KnotGrid
    bins : BinGrid
    covariate_names : tuple of strings
    eta_baseline : numpy array, ``n_u x n_s``
        Baseline log-hazard at the bin midpoints.
    u_max, s_last :
        The observed region, as for ``Fit2DResult``.
    on_boundary : boolean
    """
    A: np.ndarray = field(repr=False)
    beta: np.ndarray
    se_beta: np.ndarray
    penalty: Penalty2D
    aic: float
    deviance: float
    ed_baseline: float
    ed_total: float
    cov_theta: np.ndarray = field(repr=False)
    converged: bool
    iterations: int
    knots: tuple = field(repr=False)
    bins: object = field(repr=False)
    covariate_names: tuple = ()
    eta_baseline: np.ndarray = field(default=None, repr=False)
    u_max: float = np.nan
    s_last: np.ndarray = field(default=None, repr=False)
    on_boundary: bool = False

    @property
    def theta(self):
        return np.concatenate([glam.vec(self.A), self.beta])

    @property
    def ed(self):
        return self.ed_total

    @property
    def cov_alpha(self):
        c = self.A.size
        return self.cov_theta[:c, :c]

    def beta_table(self):
        """
        Estimates, standard errors, hazard ratios and Wald tests.
        """
        z = self.beta / self.se_beta
        return pd.DataFrame({'name': list(self.covariate_names),
                             'beta': self.beta,
                             'se': self.se_beta,
                             'hazard_ratio': np.exp(self.beta),
                             'z': z,
                             'p_value': 2 * stats.norm.sf(np.abs(z))})

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
                'ed_baseline': float(self.ed_baseline),
                'ed_total': float(self.ed_total),
                'n_coefficients': int(self.A.size),
                'n_covariates': int(len(self.beta)),
                'beta': {name: float(b) for name, b in
                         zip(self.covariate_names, self.beta)},
                'se_beta': {name: float(se) for name, se in
                            zip(self.covariate_names, self.se_beta)},
                'converged': bool(self.converged),
                'iterations': int(self.iterations),
                'rho_on_search_boundary': bool(self.on_boundary)}


@dataclass(eq=False)
class PartitionedSystem(object):
    """
    Blocks of the unpenalized normal equations ``G0 theta = rhs``.
    """
    G11: np.ndarray
    G12: np.ndarray
    G22: np.ndarray
    r1: np.ndarray
    r2: np.ndarray

    def full(self):
        """The assembled ``G0`` and ``rhs``."""
        G = np.block([[self.G11, self.G12], [self.G12.T, self.G22]])
        return G, np.concatenate([self.r1, self.r2])


class PoissonModelPH(object):
    """
    Penalized Poisson regression for per individual binned data with a
    shared baseline surface.
    """

    def __init__(self, Bu, Bs, data, penalty):
        self.Bu = Bu
        self.Bs = Bs
        self.data = data
        self.penalty = penalty
        self.c_u = Bu.shape[1]
        self.c_s = Bs.shape[1]
        self.c = self.c_u * self.c_s
        # no penalty: plain Poisson regression
        if penalty is None:
            self.P = np.zeros((self.c, self.c))
        else:
            self.P = penalty.matrix(self.c_u, self.c_s)
        self.X = data.X
        self.Y = data.scatter(data.y_rows)
        self.y_i = data.y_rows.sum(axis=1)

    def split(self, theta):
        return glam.unvec(theta[:self.c], self.c_u, self.c_s), theta[self.c:]

    def baseline(self, theta):
        A, _ = self.split(theta)
        return glam.linear_predictor_2d(self.Bu, A, self.Bs)

    def mu_rows(self, theta):
        """Expected events of each individual along its u-row."""
        _, beta = self.split(theta)
        E = self.baseline(theta)
        with np.errstate(over='ignore'):
            return (self.data.r_rows *
                    np.exp(E[self.data.u_index] + (self.X @ beta)[:, None]))

    def objective(self, theta):
        mu = self.mu_rows(theta)
        if not np.all(np.isfinite(mu)):
            return np.inf
        dev = full_poisson_deviance(self.data.y_rows, mu)
        if self.penalty is None:
            return dev
        A, _ = self.split(theta)
        return dev + self.penalty.value(A)

    def system(self, theta):
        """
        Assembles the blocks of ``G0`` and the right-hand side at
        ``theta``.
        """
        mu = self.mu_rows(theta)
        W = self.data.scatter(mu)
        G11 = glam.inner_product_2d(self.Bu, self.Bs, W)

        v = mu.sum(axis=1)
        G22 = self.X.T @ (v[:, None] * self.X)

        p = self.X.shape[1]
        G12 = np.zeros((self.c, p))
        for k in range(p):
            Wk = self.data.scatter(self.X[:, [k]] * mu)
            G12[:, k] = glam.vec(self.Bu.T @ Wk @ self.Bs)

        score1 = glam.vec(self.Bu.T @ (self.Y - W) @ self.Bs)
        score2 = self.X.T @ (self.y_i - v)
        r1 = G11 @ theta[:self.c] + G12 @ theta[self.c:] + score1
        r2 = G12.T @ theta[:self.c] + G22 @ theta[self.c:] + score2
        return PartitionedSystem(G11=G11, G12=G12, G22=G22, r1=r1, r2=r2)

    def solve_system(self, system):
        """
        Solves ``(G0 + blockdiag(P, 0)) theta = rhs`` by eliminating the
        baseline block. Returns ``theta`` and the pieces needed for the
        covariance.
        """
        K = cholesky(system.G11 + self.P)
        KiG12 = solve(K, system.G12)
        Kir1 = solve(K, system.r1)
        p = system.G22.shape[0]
        if p == 0:
            return Kir1, (K, KiG12, None)
        schur = system.G22 - system.G12.T @ KiG12
        schur = (schur + schur.T) / 2
        try:
            S = linalg.cho_factor(schur)
        except linalg.LinAlgError:
            raise _collinearity(self.X, self.data.covariate_names)
        beta = linalg.cho_solve(S, system.r2 - system.G12.T @ Kir1)
        alpha = Kir1 - KiG12 @ beta
        return np.concatenate([alpha, beta]), (K, KiG12, S)

    def update(self, theta):
        new, _ = self.solve_system(self.system(theta))
        return new


def _collinearity(X, names):
    """
    Names the covariate columns involved in a linear dependency, among
    themselves or with the intercept the baseline absorbs.
    """
    Z = np.column_stack([np.ones(len(X)), X])
    _, R, piv = linalg.qr(Z, mode='economic', pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(Z.shape) * np.finfo(float).eps * (diag[0] if len(diag) else 1)
    rank = int(np.sum(diag > tol))
    dropped = [int(k) - 1 for k in piv[rank:] if k > 0]
    cols = [names[k] for k in dropped] or list(names)
    return CollinearityError("covariates are collinear (with each other or "
                             "with the baseline intercept): "
                             f"{', '.join(cols)}", columns=cols)


def _check_design(data):
    X = data.X
    names = data.covariate_names
    n, p = X.shape
    if n < p + 1:
        raise FitError(f"need at least {p + 1} individuals for {p} "
                       f"covariates, got {n}")
    if p == 0:
        return
    constant = [names[k] for k in range(p) if np.ptp(X[:, k]) == 0]
    if constant:
        raise CollinearityError("constant covariate column(s) are absorbed by "
                                f"the baseline: {', '.join(constant)}",
                                columns=constant)
    if np.linalg.matrix_rank(np.column_stack([np.ones(n), X])) < p + 1:
        raise _collinearity(X, names)


def _covariance(pieces, c, p):
    """Inverse of the penalized block system from its factors."""
    K, KiG12, S = pieces
    cov_aa = solve(K, np.eye(c))
    if p == 0:
        return cov_aa
    cov_bb = linalg.cho_solve(S, np.eye(p))
    cov_ab = -KiG12 @ cov_bb
    cov_aa = cov_aa + KiG12 @ cov_bb @ KiG12.T
    cov = np.block([[cov_aa, cov_ab], [cov_ab.T, cov_bb]])
    return (cov + cov.T) / 2


def fit_ph(data, grids, penalty, control=None, start=None):
    """
    Fits a proportional hazards model with a two dimensional baseline.

    Parameters
    ----------
    data : BinnedData3D
        Per individual events and exposures with the covariate matrix.
    grids : tuple of KnotGrid
        ``(knots_u, knots_s)``.
    penalty : Penalty2D
    control : IWLSControl, optional
    start : numpy array, optional
        Starting ``theta = [vec(A), beta]``. Default is the fit without
        covariates and ``beta = 0``.

    Returns
    -------
    fit : PHFitResult
    """
    if not isinstance(data, BinnedData3D):
        raise TypeError("fit_ph needs BinnedData3D")
    if control is None:
        control = IWLSControl()
    _check_design(data)
    aggregated = data.aggregate()
    check_events(aggregated.Y, aggregated.R)

    Bu, Bs = marginal_bases(grids, data.grid)
    c = Bu.shape[1] * Bs.shape[1]
    p = data.p
    model = PoissonModelPH(Bu, Bs, data, penalty)
    P = model.P

    if start is None:
        baseline = fit_2d(aggregated, grids, penalty, control)
        start = np.concatenate([baseline.theta, np.zeros(p)])
    trace = iwls(model, start, control)
    theta = trace.theta

    system = model.system(theta)
    _, pieces = model.solve_system(system)
    cov = _covariance(pieces, c, p)
    G0, _ = system.full()
    ed_total = float(np.sum(cov * G0))
    mu = model.mu_rows(theta)
    dev = poisson_deviance(data.y_rows, mu)
    A, beta = model.split(theta)
    u_max, s_last = exposure_hull(aggregated.R, data.grid)

    logger.debug("fit_ph log10 rho=%s: AIC %.4f, ED %.3f, %d iterations",
                 penalty.log10, dev + 2 * ed_total, ed_total,
                 trace.iterations)
    return PHFitResult(A=A,
                       beta=beta,
                       se_beta=np.sqrt(np.diag(cov)[c:]),
                       penalty=penalty,
                       aic=dev + 2 * ed_total,
                       deviance=dev,
                       ed_baseline=ed_total - p,
                       ed_total=ed_total,
                       cov_theta=cov,
                       converged=trace.converged,
                       iterations=trace.iterations,
                       knots=tuple(grids),
                       bins=data.grid,
                       covariate_names=tuple(data.covariate_names),
                       eta_baseline=model.baseline(theta),
                       u_max=u_max,
                       s_last=s_last)


def select_rho_ph(data, grids, orders=(2, 2), strategy='numeric',
                  start=(1.0, 1.0), control=None, warm_start=None, **kwargs):
    """
    Chooses ``(rho_u, rho_s)`` of the baseline by minimizing AIC.

    Parameters and return values as for ``select_rho_2d``, with
    ``fit_ph`` fits.
    """
    def fit_func(log10_rhos, theta0):
        return fit_ph(data, grids, Penalty2D.from_log10(log10_rhos, orders),
                      control, theta0)

    return search_smoothing(fit_func, strategy, warm_start, start=start,
                            **kwargs)


def predict_ph(fit, grids=None, points=None, x=None, coords='us',
               rate_scale=1.0):
    """
    Evaluates the hazard of an individual with covariates ``x``.

    Parameters
    ----------
    fit : PHFitResult
    grids : tuple of KnotGrid, optional
    points : array_like, ``n x 2``
        ``(u, s)`` or ``(t, s)`` pairs.
    x : array_like of length ``p``
        Covariate values. Default is all zeros (the baseline).
    coords : string
        ``us`` or ``ts``.
    rate_scale : float

    Returns
    -------
    prediction : pandas DataFrame
        Columns as for ``predict_2d``. Standard errors include the
        covariances between baseline and regression coefficients.
    """
    if grids is None:
        grids = fit.knots
    p = len(fit.beta)
    x = np.zeros(p) if x is None else np.asarray(x, dtype=float)
    if x.shape != (p,):
        raise ValueError(f"x must have {p} values, got {x.size}")
    u, s = _points_us(points, coords)
    Bu = build_basis(grids[0], u).values
    Bs = build_basis(grids[1], s).values
    C = np.column_stack([glam.row_kronecker(Bu, Bs),
                         np.tile(x, (len(u), 1))])
    eta = C @ fit.theta
    var = np.einsum('ij,ij->i', C @ fit.cov_theta, C)
    return _prediction_frame(u, s, eta, var, extrapolated(fit, u, s),
                             rate_scale)


def baseline_grid(fit, rate_scale=1.0):
    """
    The baseline surface with standard errors at every bin midpoint.
    """
    Bu, Bs = marginal_bases(fit.knots, fit.bins)
    var = glam.variance_diag_2d(Bu, Bs, fit.cov_alpha)
    uu, ss = np.meshgrid(fit.bins.u.midpoints, fit.bins.s.midpoints,
                         indexing='ij')
    u, s = uu.ravel(), ss.ravel()
    return _prediction_frame(u, s, fit.eta_baseline.ravel(), var.ravel(),
                             extrapolated(fit, u, s), rate_scale)
