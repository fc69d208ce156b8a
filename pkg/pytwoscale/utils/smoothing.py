"""
AIC minimization over the smoothing parameters of two dimensional models.

Two strategies are available, picked with ``choose_search_method``:

* ``grid`` evaluates AIC on a lattice of ``(log10 rho_u, log10 rho_s)``;
* ``numeric`` runs Nelder-Mead on ``log(AIC)`` from a starting point.
"""
import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pandas as pd
from scipy.optimize import minimize

logger = logging.getLogger(__name__)

DEFAULT_LATTICE = np.round(np.linspace(-2.0, 6.0, 17), 10)
DEFAULT_START = (1.0, 1.0)
DEFAULT_BOX = (-4.0, 8.0)
MAX_EVALUATIONS = 200


class _BudgetExhausted(Exception):
    pass


class AICEvaluator(object):
    """
    Fits a model at ``(log10 rho_u, log10 rho_s)`` and keeps the trace.

    Parameters
    ----------
    fit_func : callable
        ``fit_func(log10_rhos, start)`` returns a fit result with ``aic``,
        ``ed``, ``converged`` and ``theta`` attributes.
    warm_start : boolean
        Pass the coefficients of the latest fit as ``start`` of the next.
    max_evals : integer, optional
        Budget of fits.
    """

    def __init__(self, fit_func, warm_start=True, max_evals=None):
        self.fit_func = fit_func
        self.warm_start = warm_start
        self.max_evals = max_evals
        self.rows = []
        self.best = None
        self.best_x = None
        self._cache = {}
        self._start = None

    @property
    def n_evals(self):
        return len(self.rows)

    def record(self, x, fit):
        x = tuple(float(v) for v in x)
        self._cache[x] = fit
        self.rows.append({'evaluation': len(self.rows) + 1,
                          'log10_rho_u': x[0],
                          'log10_rho_s': x[1],
                          'aic': float(fit.aic),
                          'ed': float(fit.ed),
                          'converged': bool(fit.converged)})
        # ties go to the smoother fit
        if self.best is None or \
           (fit.aic, -sum(x)) < (self.best.aic, -sum(self.best_x)):
            self.best = fit
            self.best_x = x
        if self.warm_start:
            self._start = fit.theta
        logger.info("log10 rho = (%.3f, %.3f): AIC %.4f, ED %.3f",
                    x[0], x[1], fit.aic, fit.ed)

    def __call__(self, x):
        x = tuple(float(v) for v in np.round(x, 12))
        if x in self._cache:
            return self._cache[x].aic
        if self.max_evals is not None and self.n_evals >= self.max_evals:
            raise _BudgetExhausted()
        fit = self.fit_func(x, self._start)
        self.record(x, fit)
        return fit.aic

    def trace(self):
        return pd.DataFrame(self.rows, columns=['evaluation', 'log10_rho_u',
                                                'log10_rho_s', 'aic', 'ed',
                                                'converged'])


def grid_search(evaluator, lattice=None, threads=1, **kwargs):
    """
    Evaluates AIC at every point of ``lattice`` (one array of log10 rho
    values per axis, or a single array used for both).
    """
    if lattice is None:
        lattice = (DEFAULT_LATTICE, DEFAULT_LATTICE)
    elif np.ndim(lattice[0]) == 0:
        lattice = (lattice, lattice)
    lu = np.asarray(lattice[0], dtype=float)
    ls = np.asarray(lattice[1], dtype=float)
    points = [(a, b) for a in lu for b in ls]

    if evaluator.warm_start or threads <= 1:
        for x in points:
            evaluator(x)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fits = list(pool.map(lambda x: evaluator.fit_func(x, None),
                                 points))
        for x, fit in zip(points, fits):
            evaluator.record(x, fit)

    bu, bs = evaluator.best_x
    on_boundary = bu in (lu.min(), lu.max()) or bs in (ls.min(), ls.max())
    return on_boundary


def nelder_mead_search(evaluator, start=DEFAULT_START, box=DEFAULT_BOX,
                       max_evals=MAX_EVALUATIONS, fatol=1e-3, xatol=0.05,
                       **kwargs):
    """
    Minimizes ``log(AIC)`` with Nelder-Mead from ``start`` inside ``box``.
    """
    evaluator.max_evals = max_evals
    lo, hi = box
    x0 = np.clip(np.asarray(start, dtype=float), lo, hi)
    simplex = np.array([x0, x0 + [1.0, 0.0], x0 + [0.0, 1.0]])
    simplex = np.where(simplex > hi, simplex - 2.0, simplex)

    def objective(x):
        return np.log(max(evaluator(x), 1e-300))

    try:
        minimize(objective, x0, method='Nelder-Mead',
                 bounds=[(lo, hi), (lo, hi)],
                 options={'initial_simplex': simplex,
                          'xatol': xatol,
                          'fatol': fatol,
                          'maxfev': max_evals})
    except _BudgetExhausted:
        logger.warning("AIC minimization stopped after %d evaluations",
                       evaluator.n_evals)

    bx = np.asarray(evaluator.best_x)
    return bool(np.any(bx <= lo + xatol) or np.any(bx >= hi - xatol))


def choose_search_method(strategy='numeric'):
    """
    Returns the function that searches the smoothing parameters.

    Parameters
    ----------
    strategy : string
        Accepts: grid, numeric
    """
    method = {
        'grid': grid_search,
        'numeric': nelder_mead_search,
    }
    if strategy not in method:
        raise ValueError(f"unknown rho strategy {strategy!r}; choose from "
                         f"{', '.join(sorted(method))}")
    return method[strategy]


def search_smoothing(fit_func, strategy='numeric', warm_start=None, **kwargs):
    """
    Runs a smoothing parameter search.

    Parameters
    ----------
    fit_func : callable
        ``fit_func(log10_rhos, start)`` as for ``AICEvaluator``.
    strategy : string
        ``grid`` or ``numeric``.
    warm_start : boolean, optional
        Default: on, except for a grid search on more than one thread,
        where fits run in parallel from cold starts.
    **kwargs
        Passed to the search method (``lattice``, ``threads``, ``start``,
        ``box``, ``max_evals``).

    Returns
    -------
    fit : the fit with the smallest AIC, its ``on_boundary`` flag set
    trace : pandas DataFrame of all evaluations
    """
    search = choose_search_method(strategy)
    threads = kwargs.get('threads', 1)
    if warm_start is None:
        warm_start = strategy != 'grid' or threads <= 1
    elif warm_start and strategy == 'grid' and threads > 1:
        logger.info("warm starts run the grid in order; %d threads unused",
                    threads)
    evaluator = AICEvaluator(fit_func, warm_start=warm_start)
    start = kwargs.get('start', DEFAULT_START)
    if strategy == 'numeric' and start is not None:
        # the starting point is always part of the trace
        evaluator(np.clip(start, *kwargs.get('box', DEFAULT_BOX)))
    on_boundary = search(evaluator, **kwargs)
    if on_boundary:
        logger.warning("AIC minimum at the boundary of the search region "
                       "(log10 rho = %s)", evaluator.best_x)
    logger.info("selected log10 rho = (%.3f, %.3f), AIC %.4f",
                evaluator.best_x[0], evaluator.best_x[1], evaluator.best.aic)
    best = dataclasses.replace(evaluator.best, on_boundary=bool(on_boundary))
    return best, evaluator.trace()
