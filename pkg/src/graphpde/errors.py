"""Exception types shared across the package.

Plain ``ValueError`` is used for malformed arguments (wrong shapes, negative
counts, and the like); the classes here mark failures that carry more meaning
than a bad argument.
"""


class ConfigurationError(ValueError):
    """A parameter combination violates a precondition (bounds, radii, CFL)."""


class RegimeError(ConfigurationError):
    """Coefficients fall outside the well-posedness regime of a solver."""


class DegenerateGraphError(RuntimeError):
    """A constructed graph is unusable (zero degree, zero neighbor distance)."""


class NonConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap.

    Carries the last residual so callers can report how close it got.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ParseError(ValueError):
    """A data file does not conform to its declared format."""


class ContractViolationError(RuntimeError):
    """A user-supplied callback broke a promise (e.g. density above rho_max)."""
