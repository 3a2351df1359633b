"""Exception hierarchy.

The CLI maps these onto exit codes, so keep the split between
configuration, convergence and stability problems intact.
"""


class GfkitError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(GfkitError, ValueError):
    """A parameter lies outside its admissible range."""


class DomainError(GfkitError, ValueError):
    """A size argument lies outside the computational domain."""


class ShapeError(GfkitError, ValueError):
    """Node values do not match the grid they are used on."""


class ConfigError(GfkitError):
    """A configuration document is malformed or incomplete."""


class InputError(ConfigError):
    """An input file (e.g. an initial-condition CSV) cannot be read."""


class ConvergenceError(GfkitError):
    """An iteration failed to converge.

    Attributes
    ----------
    residual : float
        Last convergence metric reached before giving up.
    iterations : int
        Number of iterations performed.
    """

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class StabilityError(GfkitError):
    """Time step above the stability bound, or a run blew up."""


class BlowUpError(StabilityError):
    """The L1 norm grew beyond the blow-up threshold during a run."""


class MissingDataError(GfkitError):
    """A diagnostic needs data the trajectory did not record."""


class CertificateUnavailable(GfkitError):
    """The decay certificate needs a finite semi-norm of the initial data."""


class FitError(GfkitError, ValueError):
    """A rate fit cannot be performed on the given series."""


class ScenarioError(GfkitError, ValueError):
    """A scenario cannot be built from the requested parameters."""
