"""
Observation schemes applied to complete simulated data.

Schemes only censor or remove subjects; they never move an event time.
"""
import logging
from dataclasses import dataclass

import numpy as np

from pytwoscale.lexis.records import IndividualRecord

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObservationScheme(object):
    """
    Parameters
    ----------
    kind : string
        A (follow-up ends at ``s_max``), B (study ends at ``t = t_max``)
        or C (B plus late entry for a fraction of subjects).
    s_max : float
    t_max : float
    fraction : float
        Share of subjects marked as late entries under C.
    entry_window : tuple of floats
        Entry times under C are uniform on this interval.
    """
    kind: str = 'A'
    s_max: float = 20.0
    t_max: float = 30.0
    fraction: float = 0.2
    entry_window: tuple = (0.0, 6.0)

    def __post_init__(self):
        choose_scheme(self.kind)
        if not 0 <= self.fraction <= 1:
            raise ValueError("fraction must be in [0, 1]")
        lo, hi = self.entry_window
        if not 0 <= lo < hi:
            raise ValueError("entry window must satisfy 0 <= lo < hi")

    @property
    def s_extent(self):
        """The largest exit time on ``s`` the scheme can produce."""
        return self.s_max if self.kind == 'A' else self.t_max


def censor_at_s_max(complete, scheme, rng=None):
    s = complete['s'].to_numpy()
    s_out = np.minimum(s, scheme.s_max)
    return complete.assign(s_in=0.0, s_out=s_out, event=s <= scheme.s_max)


def censor_at_t_max(complete, scheme, rng=None):
    s = complete['s'].to_numpy()
    limit = scheme.t_max - complete['u'].to_numpy()
    out = complete.assign(s_in=0.0, s_out=np.minimum(s, limit),
                          event=s <= limit)
    return out[out['s_out'] > 0]


def truncate_late_entries(complete, scheme, rng):
    out = censor_at_t_max(complete, scheme).reset_index(drop=True)
    n_late = int(round(scheme.fraction * len(out)))
    late = rng.choice(len(out), size=n_late, replace=False)
    entry = np.zeros(len(out))
    entry[late] = rng.uniform(*scheme.entry_window, size=n_late)
    out = out.assign(s_in=entry)
    # subjects leaving before their entry are never observed
    kept = out[out['s_out'] > out['s_in']]
    logger.debug("late entry removed %d of %d subjects",
                 len(out) - len(kept), len(out))
    return kept


def choose_scheme(kind='A'):
    """
    Returns the function that imposes an observation scheme.

    Parameters
    ----------
    kind : string
        Accepts: A, B, C
    """
    scheme = {
        'A': censor_at_s_max,
        'B': censor_at_t_max,
        'C': truncate_late_entries,
    }
    if kind not in scheme:
        raise ValueError(f"unknown observation scheme {kind!r}; choose from "
                         f"{', '.join(sorted(scheme))}")
    return scheme[kind]


def apply_scheme(complete, scheme, rng=None, covariate_names=()):
    """
    Turns complete data into observed records.

    Parameters
    ----------
    complete : pandas DataFrame
        Columns ``id, u, s`` and the covariate columns.
    scheme : ObservationScheme
    rng : numpy Generator
        Used by scheme C.
    covariate_names : sequence of strings

    Returns
    -------
    records : list of IndividualRecord
    """
    observed = choose_scheme(scheme.kind)(complete, scheme, rng)
    cols = list(covariate_names)
    X = observed[cols].to_numpy(dtype=float) if cols else \
        np.zeros((len(observed), 0))
    return [IndividualRecord(id=row.id, u=row.u, s_in=row.s_in,
                             s_out=row.s_out, event=row.event,
                             covariates=tuple(X[i]))
            for i, row in enumerate(observed.itertuples(index=False))]
