from pytwoscale.utils.iwls import IWLSControl, iwls
from pytwoscale.utils.errors import SingularSystemError
import logging
import numpy as np
import pytest


class StepModel(object):
    """
    Every move away from zero costs ``bump``; updates propose ``shift``.
    """

    def __init__(self, bump, shift, level=1000.0):
        self.bump = bump
        self.shift = shift
        self.level = level

    def objective(self, theta):
        return self.level + self.bump * float(np.any(theta != 0))

    def update(self, theta):
        return theta + self.shift


class QuadraticModel(object):

    def objective(self, theta):
        return float(np.sum((theta - 3.0) ** 2))

    def update(self, theta):
        return np.full_like(theta, 3.0)


def test_newton_step_converges():
    trace = iwls(QuadraticModel(), np.zeros(4))
    assert(trace.converged)
    assert(trace.iterations == 2)
    assert(np.allclose(trace.theta, 3.0))
    return


def test_round_off_stall_is_converged(caplog):
    # the deviance cannot drop below round-off and the proposed change
    # is small
    model = StepModel(bump=1e-6, shift=1e-4)
    with caplog.at_level(logging.WARNING, logger='pytwoscale.utils.iwls'):
        trace = iwls(model, np.zeros(3))
    assert(trace.converged)
    assert(trace.iterations == 1)
    assert(np.array_equal(trace.theta, np.zeros(3)))
    assert(caplog.records == [])
    return


def test_failed_halving_is_not_converged(caplog):
    with caplog.at_level(logging.WARNING, logger='pytwoscale.utils.iwls'):
        rising = iwls(StepModel(bump=1.0, shift=1e-4), np.zeros(3))
        far = iwls(StepModel(bump=1e-6, shift=1.0), np.zeros(3))
    assert(not rising.converged)
    assert(not far.converged)
    assert("step halving failed" in caplog.text)
    return


def test_stall_tolerance_is_configurable():
    model = StepModel(bump=1e-6, shift=1e-4)
    strict = iwls(model, np.zeros(3), IWLSControl(stall_tol=1e-5))
    assert(not strict.converged)
    return


def test_non_finite_start():
    model = StepModel(bump=0.0, shift=0.0, level=np.inf)
    with pytest.raises(SingularSystemError):
        iwls(model, np.zeros(2))
    return
