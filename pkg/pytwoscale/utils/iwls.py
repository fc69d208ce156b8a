"""
Penalized Poisson IWLS shared by the one dimensional, two dimensional and
proportional hazards models.

A model object supplies the problem specific algebra:

``objective(theta)``
    penalized deviance ``Dev_full(theta) + theta' P theta``.
``update(theta)``
    the solution of the IWLS equations at ``theta``
    (``(G0 + P) theta_new = G0 theta + C'(y - mu)``).

The engine here adds step halving, the convergence test and logging.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from pytwoscale.utils.errors import SingularSystemError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IWLSControl(object):
    """
    Iteration control.

    Parameters
    ----------
    max_iter : integer
        Maximum number of IWLS iterations.
    tol : float
        Convergence threshold on the largest absolute coefficient change.
    max_halvings : integer
        Maximum number of step halvings per iteration.
    stall_tol : float
        When no halved step lowers the penalized deviance, the fit still
        counts as converged if the largest coefficient change is below
        this value and the deviance has stalled at round-off level.
    """
    max_iter: int = 50
    tol: float = 1e-7
    max_halvings: int = 10
    stall_tol: float = 1e-2


@dataclass
class IWLSTrace(object):
    theta: np.ndarray
    converged: bool
    iterations: int
    objective: float


def poisson_deviance(y, mu):
    """
    Poisson deviance ``2 sum y ln(y / mu)``; bins with ``y = 0`` add
    nothing.
    """
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    pos = y > 0
    if np.any(mu[pos] <= 0):
        return np.inf
    return 2.0 * np.sum(y[pos] * np.log(y[pos] / mu[pos]))


def full_poisson_deviance(y, mu):
    """
    Poisson deviance including the ``2 sum (mu - y)`` term. This is the
    quantity IWLS decreases.
    """
    dev = poisson_deviance(y, mu)
    return dev + 2.0 * np.sum(np.asarray(mu) - np.asarray(y))


def cholesky(G, what="penalized system"):
    """
    Cholesky factor of a symmetric positive definite matrix, as returned
    by ``scipy.linalg.cho_factor``.
    """
    try:
        return linalg.cho_factor(G, lower=False, check_finite=True)
    except (linalg.LinAlgError, ValueError):
        with np.errstate(all='ignore'):
            cond = np.linalg.cond(G) if np.all(np.isfinite(G)) else np.inf
        raise SingularSystemError(f"{what} is singular or not positive "
                                  f"definite (condition number {cond:.3g}); "
                                  "try a larger smoothing parameter or "
                                  "check for bins with events but no "
                                  "exposure")


def solve(factor, rhs):
    return linalg.cho_solve(factor, rhs, check_finite=False)


def effective_dimension(factor, G0):
    """``ED = tr(G^{-1} G0)`` for the Cholesky factor of ``G``."""
    return float(np.trace(solve(factor, G0)))


def iwls(model, theta0, control=None):
    """
    Runs penalized IWLS with step halving.

    Parameters
    ----------
    model : object
        Supplies ``objective(theta)`` and ``update(theta)``.
    theta0 : numpy array
        Starting coefficients.
    control : IWLSControl, optional

    Returns
    -------
    trace : IWLSTrace
        The final coefficients and convergence information.
    """
    if control is None:
        control = IWLSControl()
    theta = np.array(theta0, dtype=float)
    obj = model.objective(theta)
    if not np.isfinite(obj):
        raise SingularSystemError("starting values give a non-finite "
                                  "penalized deviance")

    converged = False
    it = 0
    for it in range(1, control.max_iter + 1):
        delta = model.update(theta) - theta
        # convergence is judged on the full step
        change = np.max(np.abs(delta)) if theta.size else 0.0
        step = 1.0
        accepted = False
        for _ in range(control.max_halvings + 1):
            candidate = theta + step * delta
            cand_obj = model.objective(candidate)
            if np.isfinite(cand_obj) and \
               cand_obj <= obj + 1e-10 * max(1.0, abs(obj)):
                accepted = True
                break
            step /= 2
        if not accepted:
            # the shortest step leaves the deviance within round-off
            stalled = (np.isfinite(cand_obj) and
                       abs(cand_obj - obj) <= 1e-8 * max(1.0, abs(obj)))
            if stalled and change < control.stall_tol:
                logger.debug("IWLS stalled at round-off at iteration %d "
                             "(max change %.3g); taken as converged",
                             it, change)
                converged = True
            else:
                logger.warning("IWLS step halving failed at iteration %d "
                               "(max change %.3g)", it, change)
            break
        theta, obj = candidate, cand_obj
        logger.debug("IWLS iteration %d: penalized deviance %.10g, "
                     "max change %.3g, step %g", it, obj, change, step)
        if change < control.tol:
            converged = True
            break

    if not converged:
        logger.warning("IWLS did not converge in %d iterations", it)
    return IWLSTrace(theta=theta, converged=converged, iterations=it,
                     objective=obj)
