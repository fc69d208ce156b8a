"""
Exceptions raised by ``pytwoscale``.

Non-convergence of an IWLS fit is not an error: results carry a
``converged`` flag instead.
"""


class TwoScaleError(Exception):
    """Base class for all ``pytwoscale`` errors."""


class HazardDomainError(TwoScaleError, ValueError):
    """A point lies outside the hazard domain t >= s >= 0."""


class RecordError(TwoScaleError, ValueError):
    """An individual survival record is invalid."""


class BinningError(TwoScaleError, ValueError):
    """Records fall outside the bin grid."""


class CSVFormatError(TwoScaleError, ValueError):
    """
    A records file could not be parsed.

    Parameters
    ----------
    path : string
        The file that failed.
    diagnostics : list of strings
        One "line N: message" entry per problem found.
    """

    def __init__(self, path, diagnostics):
        self.path = path
        self.diagnostics = list(diagnostics)
        shown = "\n  ".join(self.diagnostics[:20])
        more = len(self.diagnostics) - 20
        if more > 0:
            shown += f"\n  ... and {more} more"
        super().__init__(f"malformed records file {path}:\n  {shown}")


class FitError(TwoScaleError, RuntimeError):
    """A hazard model could not be fitted."""


class SingularSystemError(FitError):
    """The penalized normal equations are not positive definite."""


class CollinearityError(FitError):
    """
    The covariate matrix is rank deficient.

    Parameters
    ----------
    columns : list of strings
        Names of the covariates involved in the dependency.
    """

    def __init__(self, message, columns=()):
        self.columns = list(columns)
        super().__init__(message)


class StudyError(TwoScaleError, RuntimeError):
    """Too many replicates of a simulation study failed."""
