"""
Binning of survival records into events and exposure times.

Bins are left-closed and right-open, ``[tau_{j-1}, tau_j)``, except the
last one which is closed. Exposure is split on the breaks. An event
exactly on an interior break ``tau_k`` is counted in the bin ending at
``tau_k``, where the subject was last at risk.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from pytwoscale.lexis.records import covariate_matrix
from pytwoscale.utils.errors import BinningError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BinAxis(object):
    """
    A regular axis of ``n`` bins of width ``width`` starting at ``origin``.
    """
    width: float
    n: int
    origin: float = 0.0
    label: str = 's'

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"bin width must be positive, got {self.width}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"bin count must be a positive integer, "
                             f"got {self.n}")

    @classmethod
    def covering(cls, lo, hi, width, label='s'):
        """
        The smallest axis starting at ``lo`` whose bins cover ``hi``.
        """
        n = max(1, int(math.ceil((hi - lo) / width - 1e-9)))
        return cls(width=width, n=n, origin=lo, label=label)

    @property
    def breaks(self):
        return self.origin + self.width * np.arange(self.n + 1)

    @property
    def end(self):
        return self.origin + self.width * self.n

    @property
    def midpoints(self):
        return self.breaks[1:] - self.width / 2

    def locate(self, x):
        """
        Bin index of each value in ``x``; -1 below the axis and ``n``
        beyond it.
        """
        x = np.asarray(x, dtype=float)
        breaks = self.breaks
        idx = np.searchsorted(breaks, x, side='right') - 1
        # the last bin is closed
        idx = np.where(x == breaks[-1], self.n - 1, idx)
        idx = np.where(x > breaks[-1], self.n, idx)
        return idx

    def locate_exit(self, x):
        """
        Bin index of exit times ``x``. An exit exactly on a break belongs to
        the bin ending there, the last bin with exposure.
        """
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breaks, x, side='left') - 1
        return np.clip(idx, 0, self.n - 1)


@dataclass(frozen=True)
class BinGrid(object):
    """
    Bin axes for ``s`` and, for two dimensional data, ``u``.
    """
    s: BinAxis
    u: BinAxis = None

    @property
    def ndim(self):
        return 1 if self.u is None else 2

    @property
    def shape(self):
        if self.u is None:
            return (self.s.n,)
        return (self.u.n, self.s.n)


@dataclass(frozen=True, eq=False)
class BinnedData1D(object):
    """
    Events ``y`` and exposures ``r`` per bin of ``grid.s``.
    """
    y: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    grid: BinGrid

    @property
    def n_events(self):
        return int(self.y.sum())


@dataclass(frozen=True, eq=False)
class BinnedData2D(object):
    """
    Event counts ``Y`` and exposures ``R`` on the ``n_u x n_s`` grid.
    """
    Y: np.ndarray = field(repr=False)
    R: np.ndarray = field(repr=False)
    grid: BinGrid

    @property
    def n_events(self):
        return int(self.Y.sum())


@dataclass(frozen=True, eq=False)
class BinnedData3D(object):
    """
    Per individual events and exposures plus the covariate matrix.

    Each individual occupies one row ``u_index[i]`` of its ``n_u x n_s``
    slice, so only that row is stored: ``y_rows[i]`` and ``r_rows[i]``.

    Parameters
    ----------
    u_index : numpy array of integers
        The u-bin of each individual.
    y_rows, r_rows : numpy arrays, ``n x n_s``
        Events and exposures of each individual along ``s``.
    X : numpy array, ``n x p``
        Covariates in record order.
    grid : BinGrid
    covariate_names : list of strings
    """
    u_index: np.ndarray = field(repr=False)
    y_rows: np.ndarray = field(repr=False)
    r_rows: np.ndarray = field(repr=False)
    X: np.ndarray = field(repr=False)
    grid: BinGrid
    covariate_names: tuple = ()

    @property
    def n(self):
        return len(self.u_index)

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def n_events(self):
        return int(self.y_rows.sum())

    def slice(self, i):
        """The full ``n_u x n_s`` arrays ``(Y_i, R_i)`` of individual ``i``."""
        Y = np.zeros(self.grid.shape)
        R = np.zeros(self.grid.shape)
        Y[self.u_index[i]] = self.y_rows[i]
        R[self.u_index[i]] = self.r_rows[i]
        return Y, R

    def scatter(self, rows):
        """
        Sums per individual ``n x n_s`` rows into an ``n_u x n_s`` array.
        """
        out = np.zeros(self.grid.shape)
        np.add.at(out, self.u_index, rows)
        return out

    def aggregate(self):
        """Sums the slices over individuals into a ``BinnedData2D``."""
        return BinnedData2D(Y=self.scatter(self.y_rows),
                            R=self.scatter(self.r_rows),
                            grid=self.grid)


def _record_arrays(records):
    s_in = np.array([rec.s_in for rec in records], dtype=float)
    s_out = np.array([rec.s_out for rec in records], dtype=float)
    event = np.array([rec.event for rec in records], dtype=bool)
    u = np.array([rec.u for rec in records], dtype=float)
    return u, s_in, s_out, event


def _check_covered(records, values, axis, name):
    idx = axis.locate(values)
    outside = np.flatnonzero((idx < 0) | (idx >= axis.n))
    if len(outside) > 0:
        ids = [records[i].id for i in outside[:10]]
        more = '' if len(outside) <= 10 else f" and {len(outside) - 10} more"
        raise BinningError(f"{len(outside)} record(s) with {name} outside the "
                           f"grid [{axis.origin}, {axis.end}]: "
                           f"{', '.join(ids)}{more}")
    return idx


def _exposure_rows(records, axis):
    """
    Exposure and event rows along ``s``, one row per record.
    """
    u, s_in, s_out, event = _record_arrays(records)
    n = len(records)
    if n == 0:
        return np.zeros((0, axis.n)), np.zeros((0, axis.n))

    _check_covered(records, s_in, axis, 's_in')
    _check_covered(records, s_out, axis, 's_out')
    out_bin = axis.locate_exit(s_out)

    lo = axis.breaks[:-1]
    hi = axis.breaks[1:]
    r_rows = (np.clip(s_out[:, None], lo, hi) -
              np.clip(s_in[:, None], lo, hi))
    y_rows = np.zeros((n, axis.n))
    hits = np.flatnonzero(event)
    y_rows[hits, out_bin[hits]] = 1.0
    return y_rows, r_rows


def bin_1d(records, grid):
    """
    Bins records along ``s``.

    Parameters
    ----------
    records : list of IndividualRecord
    grid : BinGrid or BinAxis
        The ``s`` axis.

    Returns
    -------
    binned : BinnedData1D
    """
    if isinstance(grid, BinAxis):
        grid = BinGrid(s=grid)
    y_rows, r_rows = _exposure_rows(records, grid.s)
    return BinnedData1D(y=y_rows.sum(axis=0), r=r_rows.sum(axis=0), grid=grid)


def _u_rows(records, grid):
    if grid.u is None:
        raise ValueError("a two dimensional grid needs a u axis")
    u = np.array([rec.u for rec in records], dtype=float)
    if len(records) == 0:
        return np.zeros(0, dtype=int)
    return _check_covered(records, u, grid.u, 'u')


def bin_2d(records, grid):
    """
    Bins records on the ``(u, s)`` grid. Each record contributes to the
    single u-row that contains its ``u``.

    Parameters
    ----------
    records : list of IndividualRecord
    grid : BinGrid
        A grid with both axes.

    Returns
    -------
    binned : BinnedData2D
    """
    return bin_individuals(records, grid, with_covariates=False).aggregate()


def bin_individuals(records, grid, covariate_names=None,
                    with_covariates=True):
    """
    Bins records on the ``(u, s)`` grid keeping individuals apart, as
    needed for proportional hazards regression.

    Parameters
    ----------
    records : list of IndividualRecord
    grid : BinGrid
        A grid with both axes.
    covariate_names : list of strings, optional
        Labels for the covariate columns.

    Returns
    -------
    binned : BinnedData3D
    """
    u_index = _u_rows(records, grid)
    y_rows, r_rows = _exposure_rows(records, grid.s)
    if with_covariates:
        X = covariate_matrix(records)
    else:
        X = np.zeros((len(records), 0))
    if covariate_names is None:
        covariate_names = [f'x{v+1}' for v in range(X.shape[1])]
    if len(covariate_names) != X.shape[1]:
        raise ValueError(f"{len(covariate_names)} covariate names for "
                         f"{X.shape[1]} covariates")
    logger.debug("binned %d records on a %s grid", len(records), grid.shape)
    return BinnedData3D(u_index=u_index,
                        y_rows=y_rows,
                        r_rows=r_rows,
                        X=X,
                        grid=grid,
                        covariate_names=tuple(covariate_names))


def occurrence_exposure(binned):
    """
    Bin-wise occurrence-exposure rates ``y / r``; NaN where there is no
    exposure.
    """
    if isinstance(binned, BinnedData1D):
        y, r = binned.y, binned.r
    else:
        y, r = binned.Y, binned.R
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(r > 0, y / np.where(r > 0, r, 1.0), np.nan)
