"""
Hazard surfaces over ``(u, s)`` used to simulate survival data, and the
inverse transform sampler of event times.
"""
import numpy as np
from scipy.integrate import cumulative_trapezoid

# integration grid of the sampler
S_CAP = 200.0
S_STEP = 0.01
_S_GRID = np.linspace(0.0, S_CAP, int(round(S_CAP / S_STEP)) + 1)


class HazardSpec(object):
    """
    A hazard ``lambda(u, s)`` with its parameters.

    Parameters
    ----------
    kind : string
        HM1, HM2, HM3 or custom.
    func : callable
        ``func(u, s)`` broadcasting over numpy arrays.
    params : dictionary
        The constants of ``func``, kept for the run manifest.
    """

    def __init__(self, kind, func, params=None):
        self.kind = kind
        self.func = func
        self.params = dict(params or {})

    def __call__(self, u, s):
        u = np.asarray(u, dtype=float)
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(self.func(u, s), np.broadcast(u, s).shape)

    def __repr__(self):
        return f"HazardSpec({self.kind!r}, {self.params})"

    @classmethod
    def custom(cls, func, **params):
        return cls('custom', func, params)

    @classmethod
    def constant(cls, rate):
        return cls('custom', lambda u, s: np.full(np.broadcast(u, s).shape,
                                                  float(rate)),
                   {'rate': float(rate)})

    def grid(self, u_points, s_points):
        """The hazard on the outer grid ``u_points x s_points``."""
        uu, ss = np.meshgrid(u_points, s_points, indexing='ij')
        return self(uu, ss)

    def cumulative(self, u, s_points=None):
        """
        Cumulative hazard ``int_0^s lambda(u, v) dv`` by the trapezoidal
        rule on ``s_points`` (default: the sampler grid).
        """
        if s_points is None:
            s_points = _S_GRID
        values = self(np.full(len(s_points), float(u)), s_points)
        if np.any(values[1:] <= 0) or not np.all(np.isfinite(values)):
            raise ValueError(f"hazard model {self.kind} is not positive and "
                             f"finite at u={u}")
        return cumulative_trapezoid(values, s_points, initial=0.0)


def hm1(s_scale=0.06, decay=0.3):
    """Unimodal in ``s``, constant in ``u``."""
    def func(u, s):
        return s_scale * s * np.exp(-decay * s) + 0.0 * u
    return HazardSpec('HM1', func, {'a': s_scale, 'b': decay})


def hm2(a0=0.09, a1=-0.002, b0=0.4, b1=-0.01):
    """
    ``a(u) s exp(-b(u) s)``: the peak moves to later ``s`` and lowers as
    ``u`` grows.
    """
    def func(u, s):
        a = a0 + a1 * u
        b = b0 + b1 * u
        return a * s * np.exp(-b * s)
    return HazardSpec('HM2', func, {'a0': a0, 'a1': a1, 'b0': b0, 'b1': b1})


def hm3(a0=0.002, a1=0.0008, b0=0.15, b1=-0.003):
    """
    ``a(u) exp(b(u) s)``, a Gompertz hazard in ``s`` whose level and slope
    change with ``u``.
    """
    def func(u, s):
        a = a0 + a1 * u
        b = b0 + b1 * u
        return a * np.exp(b * s)
    return HazardSpec('HM3', func, {'a0': a0, 'a1': a1, 'b0': b0, 'b1': b1})


def gompertz_inverse(spec, u, e):
    """
    Closed form ``s`` with cumulative hazard ``e`` under HM3.
    """
    p = spec.params
    a = p['a0'] + p['a1'] * u
    b = p['b0'] + p['b1'] * u
    return np.log1p(b * np.asarray(e) / a) / b


def choose_hazard_model(name='HM1'):
    """
    Returns the hazard surface of a simulation.

    Parameters
    ----------
    name : string
        Accepts: HM1, HM2, HM3
    """
    model = {
        'HM1': hm1,
        'HM2': hm2,
        'HM3': hm3,
    }
    if name not in model:
        raise ValueError(f"unknown hazard model {name!r}; choose from "
                         f"{', '.join(sorted(model))}")
    return model[name]()


def sample_event_time(spec, u, risk_multiplier=1.0, rng=None, e=None):
    """
    Draws an event time on ``s`` by inverting the cumulative hazard.

    Parameters
    ----------
    spec : HazardSpec
    u : float
        Offset between the scale origins.
    risk_multiplier : float
        ``exp(x' beta)``, or 1 without covariates.
    rng : numpy Generator, optional
        Needed unless ``e`` is given.
    e : float, optional
        The unit exponential draw.

    Returns
    -------
    s : float
        The event time; ``S_CAP`` if the cumulative hazard stays below
        ``e``.
    """
    if risk_multiplier < 0:
        raise ValueError("risk multiplier must be non-negative")
    if e is None:
        e = rng.standard_exponential()
    cum = risk_multiplier * spec.cumulative(u)
    if cum[-1] < e:
        return S_CAP
    return float(np.interp(e, cum, _S_GRID))
