"""
Individual survival records on two time scales.

A record follows one subject through the Lexis plane. The first time
scale ``t`` and the second scale ``s`` advance together, so a subject is
described by the fixed offset ``u = t - s`` (the value of ``t`` at the
origin of ``s``) together with its entry and exit times on ``s``.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from pytwoscale.utils.errors import (CSVFormatError, HazardDomainError,
                                     RecordError)

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ['id', 'u', 's_in', 's_out', 'event']


@dataclass(frozen=True)
class IndividualRecord(object):
    """
    One subject's follow-up.

    Parameters
    ----------
    id : string
        Subject identifier.
    u : float
        Entry offset ``u = t - s`` (non-negative).
    s_in : float
        Left truncation (entry) time on ``s``. Default is zero.
    s_out : float
        Exit time on ``s``; must exceed ``s_in``.
    event : boolean
        True if the exit is an event, False if right censored.
    covariates : tuple of floats
        Covariate values, possibly empty.
    """
    id: str
    u: float
    s_out: float
    event: bool
    s_in: float = 0.0
    covariates: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, 'id', str(self.id))
        object.__setattr__(self, 'event', bool(self.event))
        object.__setattr__(self, 'covariates',
                           tuple(float(x) for x in self.covariates))
        values = (self.u, self.s_in, self.s_out) + self.covariates
        if not np.all(np.isfinite(values)):
            raise RecordError(f"record {self.id}: non-finite value")
        if self.u < 0:
            raise RecordError(f"record {self.id}: u must be non-negative")
        if self.s_in < 0:
            raise RecordError(f"record {self.id}: s_in must be non-negative")
        if not self.s_in < self.s_out:
            raise RecordError(f"record {self.id}: s_in ({self.s_in}) must be "
                              f"smaller than s_out ({self.s_out})")

    @property
    def t_in(self):
        return self.u + self.s_in

    @property
    def t_out(self):
        return self.u + self.s_out


def transform_ts_to_us(t, s):
    """
    Maps ``(t, s)`` to ``(u, s)`` with ``u = t - s``.

    Parameters
    ----------
    t, s : float or array_like
        Coordinates on the two time scales; ``t >= s >= 0``.

    Returns
    -------
    u, s : float or numpy array
    """
    t_arr = np.asarray(t, dtype=float)
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise HazardDomainError("point outside hazard domain s >= 0")
    if np.any(t_arr < s_arr):
        raise HazardDomainError("point outside hazard domain t > s")
    u = t_arr - s_arr
    if np.ndim(u) == 0:
        return float(u), float(s_arr)
    return u, s_arr


def transform_us_to_ts(u, s):
    """
    Maps ``(u, s)`` back to ``(t, s)`` with ``t = u + s``.
    """
    u_arr = np.asarray(u, dtype=float)
    s_arr = np.asarray(s, dtype=float)
    if np.any(u_arr < 0) or np.any(s_arr < 0):
        raise HazardDomainError("point outside hazard domain u, s >= 0")
    t = u_arr + s_arr
    if np.ndim(t) == 0:
        return float(t), float(s_arr)
    return t, s_arr


def record_from_origins(id, t_origin, s_origin, exit_time, event,
                        covariates=(), entry_time=None):
    """
    Builds a record from times measured on a common clock, e.g. days
    since the start of a study.

    Parameters
    ----------
    id : string
        Subject identifier.
    t_origin : float
        Time of the origin of the first scale (e.g. randomization).
    s_origin : float
        Time of the origin of the second scale (e.g. recurrence).
    exit_time : float
        Time of death or censoring.
    event : boolean
        True if ``exit_time`` is an event.
    covariates : sequence of floats
        Covariate values.
    entry_time : float, optional
        Time of delayed entry. Entries before ``s_origin`` count from the
        origin of ``s``.

    Returns
    -------
    record : IndividualRecord
    """
    if s_origin < t_origin:
        raise HazardDomainError(f"record {id}: origin of s precedes the "
                                "origin of t")
    if exit_time <= s_origin:
        raise RecordError(f"record {id}: exit at or before the origin of s")
    s_in = 0.0
    if entry_time is not None:
        s_in = max(0.0, entry_time - s_origin)
    return IndividualRecord(id=id,
                            u=s_origin - t_origin,
                            s_in=s_in,
                            s_out=exit_time - s_origin,
                            event=event,
                            covariates=tuple(covariates))


def covariate_matrix(records):
    """
    Stacks the covariates of ``records`` into an ``n x p`` matrix, in
    record order.
    """
    lengths = np.unique([len(rec.covariates) for rec in records])
    if len(lengths) > 1:
        raise RecordError("records have inconsistent covariate lengths: "
                          f"{', '.join(str(n) for n in lengths)}")
    p = int(lengths[0]) if len(lengths) else 0
    if len(records) == 0:
        return np.zeros((0, p))
    return np.array([rec.covariates for rec in records],
                    dtype=float).reshape(len(records), p)


def records_to_frame(records, covariate_names=None):
    """
    Returns ``records`` as a pandas DataFrame in the CSV layout.
    """
    X = covariate_matrix(records)
    if covariate_names is None:
        covariate_names = [f'x{v+1}' for v in range(X.shape[1])]
    df = pd.DataFrame({'id': [rec.id for rec in records],
                       'u': [rec.u for rec in records],
                       's_in': [rec.s_in for rec in records],
                       's_out': [rec.s_out for rec in records],
                       'event': [int(rec.event) for rec in records]})
    for v, name in enumerate(covariate_names):
        df[name] = X[:, v]
    return df


def write_records_csv(records, path, covariate_names=None):
    """
    Writes ``records`` to ``path`` in the records CSV format.
    """
    df = records_to_frame(records, covariate_names)
    df.to_csv(path, index=False, encoding='utf-8')
    return path


def read_records_csv(path, covariates=None):
    """
    Reads survival records from a CSV file.

    The file needs a header row with the columns ``id,u,s_in,s_out,event``;
    ``event`` is 0 or 1. Every other column is a numeric covariate, in
    header order.

    Parameters
    ----------
    path : string
        Path to the CSV file.
    covariates : list of strings, optional
        Use only these covariate columns, in this order. Default is all
        extra columns.

    Returns
    -------
    records : list of IndividualRecord
    covariate_names : list of strings
    """
    try:
        df = pd.read_csv(path, dtype={'id': str}, encoding='utf-8')
    except (pd.errors.ParserError, pd.errors.EmptyDataError,
            UnicodeDecodeError) as err:
        raise CSVFormatError(path, [f"line 1: {err}"])

    df.columns = [str(col).strip() for col in df.columns]
    missing = [col for col in REQUIRED_COLUMNS if col not in df.columns]
    if missing:
        raise CSVFormatError(path, [f"line 1: missing required column(s) "
                                    f"{', '.join(missing)}"])

    extra = [col for col in df.columns if col not in REQUIRED_COLUMNS]
    if covariates is None:
        covariates = extra
    else:
        unknown = [col for col in covariates if col not in extra]
        if unknown:
            raise CSVFormatError(path, [f"line 1: unknown covariate column(s) "
                                        f"{', '.join(unknown)}"])

    numeric = ['u', 's_in', 's_out', 'event'] + list(covariates)
    values = df[numeric].apply(pd.to_numeric, errors='coerce')

    diagnostics = []
    records = []
    for row in range(len(df)):
        # header is line 1
        line = row + 2
        bad = [col for col in numeric if not np.isfinite(values.at[row, col])]
        if bad:
            diagnostics.append(f"line {line}: non-numeric or missing value in "
                               f"{', '.join(bad)}")
            continue
        event = values.at[row, 'event']
        if event not in (0, 1):
            diagnostics.append(f"line {line}: event must be 0 or 1, "
                               f"got {df.at[row, 'event']}")
            continue
        try:
            records.append(IndividualRecord(
                id=df.at[row, 'id'],
                u=values.at[row, 'u'],
                s_in=values.at[row, 's_in'],
                s_out=values.at[row, 's_out'],
                event=bool(event),
                covariates=tuple(values.loc[row, list(covariates)])))
        except RecordError as err:
            diagnostics.append(f"line {line}: {err}")

    if diagnostics:
        raise CSVFormatError(path, diagnostics)

    logger.info("read %d records with %d covariates from %s",
                len(records), len(covariates), path)
    return records, list(covariates)
