"""Exception hierarchy shared by all modules."""


class LabError(Exception):
    """Base class for every error raised by the package."""


class GridTooSmallError(LabError, ValueError):
    """Grid has too few interior points for the requested stencil."""


class GridMismatchError(LabError, ValueError):
    """Two fields live on different grids or bands."""


class ZeroModeError(LabError, ValueError):
    """An operation that needs an invertible Laplacian was asked for k = 0."""


class NumericalBreakdownError(LabError, ArithmeticError):
    """A linear solve or time step failed."""


class CostGuardError(LabError, ValueError):
    """A dense oracle was requested on a grid that is too large."""


class ConstraintViolationError(LabError, ValueError):
    """Functional constants violate one of the admissibility inequalities.

    Parameters
    ----------
    message : str
        Human readable description.
    inequality : str
        Name of the first inequality that failed.
    """

    def __init__(self, message, inequality):
        super().__init__(message)
        self.inequality = inequality


class SeriesTooShortError(LabError, ValueError):
    """A diagnostic needs more samples than were provided."""


class FitRejectedError(LabError, ValueError):
    """A decay fit did not meet the quality threshold."""

    def __init__(self, message, nu=None, k=None):
        super().__init__(message)
        self.nu = nu
        self.k = k


class CFLViolationError(LabError, ValueError):
    """Explicit step exceeds the advective stability limit."""

    def __init__(self, message, advised_dt):
        super().__init__(message)
        self.advised_dt = advised_dt


class ConfigError(LabError, ValueError):
    """Invalid experiment configuration.

    Parameters
    ----------
    message : str
        Human readable description.
    path : str
        Dotted path of the offending field.
    """

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class RunError(LabError, RuntimeError):
    """A numerical failure inside a harness run.

    ``context`` holds the experiment kind, the cell parameters and the
    configuration hash; the original exception is chained as the cause.
    """

    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = dict(context or {})
