"""
Simulation studies: repeated simulate, bin, fit cycles and the recovery
of the true hazard surface and regression coefficients.

Every replicate draws from its own Philox stream spawned from the study
seed, so results do not depend on the order or the number of workers.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from pytwoscale.hazard.fit2d import predict_2d, select_rho_2d
from pytwoscale.hazard.ph2d import predict_ph, select_rho_ph
from pytwoscale.lexis.binning import BinAxis, BinGrid, bin_2d, bin_individuals
from pytwoscale.simulation.hazard_models import sample_event_time
from pytwoscale.simulation.schemes import apply_scheme
from pytwoscale.splines.basis import KnotGrid
from pytwoscale.utils.errors import StudyError, TwoScaleError

logger = logging.getLogger(__name__)

COVARIATE_NAMES = ('x1', 'x2')
# hazard recovery is reported on this square in all schemes
METRIC_RANGE = (0.0, 20.0)
MAX_FAILURE_SHARE = 0.1


@dataclass(frozen=True)
class SimConfig(object):
    """
    Parameters
    ----------
    n : integer
        Nominal sample size.
    replicates : integer
    seed : integer
    covariates : boolean
        Add ``x1 ~ N(0, 1)`` and a centered binary ``x2``.
    beta : tuple of floats
        True effects of ``(x1, x2)``.
    u_range : tuple of floats
        ``u`` is uniform on this interval.
    """
    n: int = 1000
    replicates: int = 1
    seed: int = 2024
    covariates: bool = False
    beta: tuple = (0.5, 0.7)
    u_range: tuple = (0.0, 20.0)

    def __post_init__(self):
        if self.n < 1 or self.replicates < 1:
            raise ValueError("n and replicates must be positive")
        if not self.u_range[0] < self.u_range[1]:
            raise ValueError("u_range must be increasing")

    def streams(self):
        """One independent generator per replicate."""
        children = np.random.SeedSequence(self.seed).spawn(self.replicates)
        return [np.random.Generator(np.random.Philox(c)) for c in children]


@dataclass(frozen=True)
class EstimatorSettings(object):
    """How each replicate is binned and fitted."""
    bin_width: float = 1.0
    nseg: tuple = (12, 12)
    degree: int = 3
    orders: tuple = (2, 2)
    strategy: str = 'numeric'
    start: tuple = (1.0, 1.0)
    warm_start: bool = True


def simulate_complete(config, spec, rng):
    """
    Complete (uncensored) data: ``id, u, s`` and the covariates.
    """
    n = config.n
    u = rng.uniform(*config.u_range, size=n)
    df = pd.DataFrame({'id': [f'sim{i + 1}' for i in range(n)], 'u': u})
    if config.covariates:
        x1 = rng.standard_normal(n)
        x2 = rng.integers(0, 2, size=n) - 0.5
        df['x1'] = x1
        df['x2'] = x2
        mult = np.exp(np.column_stack([x1, x2]) @ np.asarray(config.beta))
    else:
        mult = np.ones(n)
    e = rng.standard_exponential(n)
    df['s'] = [sample_event_time(spec, u[i], mult[i], e=e[i])
               for i in range(n)]
    return df


def simulate_dataset(config, spec, scheme, rng=None, replicate=0):
    """
    One observed data set.

    Returns
    -------
    records : list of IndividualRecord
    covariate_names : list of strings
    """
    if rng is None:
        rng = config.streams()[replicate]
    complete = simulate_complete(config, spec, rng)
    names = list(COVARIATE_NAMES) if config.covariates else []
    records = apply_scheme(complete, scheme, rng, names)
    logger.debug("simulated %d of %d subjects observed under scheme %s",
                 len(records), config.n, scheme.kind)
    return records, names


def study_grids(config, scheme, settings):
    """
    The bin grid and knot grids of a replicate fit.
    """
    lo, hi = config.u_range
    u_axis = BinAxis.covering(lo, hi, settings.bin_width, label='u')
    s_axis = BinAxis.covering(0.0, scheme.s_extent, settings.bin_width,
                              label='s')
    knots = (KnotGrid(u_axis.origin, u_axis.end, settings.nseg[0],
                      settings.degree),
             KnotGrid(s_axis.origin, s_axis.end, settings.nseg[1],
                      settings.degree))
    return BinGrid(s=s_axis, u=u_axis), knots


def metric_points():
    lo, hi = METRIC_RANGE
    mid = np.arange(lo, hi) + 0.5
    uu, ss = np.meshgrid(mid, mid, indexing='ij')
    return mid, np.column_stack([uu.ravel(), ss.ravel()])


def fit_replicate(records, names, bins, knots, settings):
    """
    Fits one data set and evaluates the (baseline) hazard on the metric
    grid.
    """
    kwargs = dict(orders=settings.orders, strategy=settings.strategy,
                  start=settings.start, warm_start=settings.warm_start)
    mid, points = metric_points()
    if names:
        data = bin_individuals(records, bins, names)
        fit, _ = select_rho_ph(data, knots, **kwargs)
        pred = predict_ph(fit, knots, points)
        beta, se = fit.beta, fit.se_beta
    else:
        data = bin_2d(records, bins)
        fit, _ = select_rho_2d(data, knots, **kwargs)
        pred = predict_2d(fit, knots, points)
        beta, se = np.zeros(0), np.zeros(0)
    surface = pred['lambda'].to_numpy().reshape(len(mid), len(mid))
    return {'surface': surface, 'beta': beta, 'se': se,
            'converged': fit.converged, 'ed': fit.ed}


@dataclass(eq=False)
class StudyResult(object):
    """
    Recovery metrics of a study on the metric grid midpoints.

    Surfaces are ``n_u x n_s`` arrays on the hazard scale; ``mc_se`` is
    the Monte Carlo standard error of ``mean``. Only converged replicates
    enter the estimates; ``failures`` and ``nonconverged`` list the rest.
    """
    midpoints: np.ndarray
    truth: np.ndarray = field(repr=False)
    estimates: np.ndarray = field(repr=False)
    betas: pd.DataFrame = field(repr=False)
    failures: list
    retained: list
    config: SimConfig
    beta_truth: tuple = ()
    nonconverged: list = field(default_factory=list)

    @property
    def n_ok(self):
        return self.estimates.shape[0]

    @property
    def complete(self):
        """True if every replicate was fitted and converged."""
        return not self.failures and not self.nonconverged

    @property
    def mean(self):
        return self.estimates.mean(axis=0)

    @property
    def bias(self):
        return self.mean - self.truth

    @property
    def rmse(self):
        return np.sqrt(np.mean((self.estimates - self.truth) ** 2, axis=0))

    @property
    def mc_se(self):
        if self.n_ok < 2:
            return np.full(self.truth.shape, np.nan)
        return self.estimates.std(axis=0, ddof=1) / np.sqrt(self.n_ok)

    def interior(self, lo=2.0, hi=18.0):
        """Mask of midpoints with both ``u`` and ``s`` in ``[lo, hi]``."""
        inside = (self.midpoints >= lo) & (self.midpoints <= hi)
        return np.outer(inside, inside)

    def to_frame(self):
        uu, ss = np.meshgrid(self.midpoints, self.midpoints, indexing='ij')
        return pd.DataFrame({'u': uu.ravel(),
                             's': ss.ravel(),
                             'truth': self.truth.ravel(),
                             'mean': self.mean.ravel(),
                             'bias': self.bias.ravel(),
                             'rmse': self.rmse.ravel(),
                             'mc_se': self.mc_se.ravel()})

    def beta_summary(self):
        """Mean, spread, mean standard error and coverage of each beta."""
        rows = []
        for v, name in enumerate(COVARIATE_NAMES[:len(self.beta_truth)]):
            sub = self.betas[self.betas['name'] == name]
            truth = self.beta_truth[v]
            covered = (np.abs(sub['beta'] - truth) <= 2 * sub['se'])
            rows.append({'name': name,
                         'truth': truth,
                         'mean': sub['beta'].mean(),
                         'sd': sub['beta'].std(ddof=1),
                         'mean_se': sub['se'].mean(),
                         'coverage': covered.mean()})
        return pd.DataFrame(rows, columns=['name', 'truth', 'mean', 'sd',
                                           'mean_se', 'coverage'])

    def summary(self):
        mask = self.interior()
        out = {'config': asdict(self.config),
               'replicates_ok': int(self.n_ok),
               'replicates_failed': len(self.failures),
               'replicates_nonconverged': len(self.nonconverged),
               'nonconverged': list(self.nonconverged),
               'failures': [{'replicate': r, 'error': msg}
                            for r, msg in self.failures],
               'mean_retained': float(np.mean(self.retained)),
               'interior_mean_rmse': float(self.rmse[mask].mean()),
               'interior_mean_abs_bias': float(np.abs(self.bias[mask]).mean())}
        if self.n_ok > 1:
            within = np.abs(self.bias[mask]) < 2 * self.mc_se[mask]
            out['interior_share_bias_within_2mcse'] = float(within.mean())
        if len(self.beta_truth):
            out['beta'] = self.beta_summary().set_index('name').to_dict(
                orient='index')
        return out


def _run_one(r, rng, config, spec, scheme, settings):
    try:
        records, names = simulate_dataset(config, spec, scheme, rng)
        bins, knots = study_grids(config, scheme, settings)
        result = fit_replicate(records, names, bins, knots, settings)
    except TwoScaleError as err:
        logger.warning("replicate %d failed: %s", r + 1, err)
        return r, None, str(err), 0
    if not result['converged']:
        logger.warning("replicate %d: IWLS did not converge", r + 1)
    logger.info("replicate %d/%d done (ED %.2f)", r + 1, config.replicates,
                result['ed'])
    return r, result, None, len(records)


def run_study(config, spec, scheme, settings=None, threads=1):
    """
    Runs a simulation study.

    Parameters
    ----------
    config : SimConfig
    spec : HazardSpec
    scheme : ObservationScheme
    settings : EstimatorSettings, optional
        Default: unit bins, 12 segments and second order penalties on
        both axes, numeric AIC minimization.
    threads : integer
        Replicates fitted in parallel.

    Returns
    -------
    result : StudyResult
    """
    if settings is None:
        settings = EstimatorSettings()
    streams = config.streams()
    jobs = [(r, streams[r], config, spec, scheme, settings)
            for r in range(config.replicates)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(lambda job: _run_one(*job), jobs))
    else:
        outcomes = [_run_one(*job) for job in jobs]
    # fixed replicate order keeps the means reproducible
    outcomes.sort(key=lambda o: o[0])

    failures = [(r + 1, msg) for r, res, msg, _ in outcomes if res is None]
    if len(failures) > MAX_FAILURE_SHARE * config.replicates:
        raise StudyError(f"{len(failures)} of {config.replicates} replicates "
                         f"failed; first: {failures[0][1]}")

    nonconverged = [r + 1 for r, res, _, _ in outcomes
                    if res is not None and not res['converged']]
    ok = [(r, res, n_obs) for r, res, _, n_obs in outcomes
          if res is not None and res['converged']]
    if not ok:
        raise StudyError(f"no replicate of {config.replicates} converged")
    if failures or nonconverged:
        logger.warning("%d replicate(s) failed and %d did not converge; "
                       "metrics use the other %d", len(failures),
                       len(nonconverged), len(ok))
    rows = []
    for r, res, _ in ok:
        for v in range(len(res['beta'])):
            rows.append({'replicate': r + 1, 'name': COVARIATE_NAMES[v],
                         'beta': res['beta'][v], 'se': res['se'][v]})
    mid, _ = metric_points()
    return StudyResult(midpoints=mid,
                       truth=spec.grid(mid, mid),
                       estimates=np.stack([res['surface'] for _, res, _ in ok]),
                       betas=pd.DataFrame(rows, columns=['replicate', 'name',
                                                         'beta', 'se']),
                       failures=failures,
                       retained=[n_obs for _, _, n_obs in ok],
                       config=config,
                       beta_truth=tuple(config.beta) if config.covariates
                       else (),
                       nonconverged=nonconverged)
