"""Exception hierarchy shared by all modules.

The CLI maps :class:`ValidationError` (and subclasses) to exit status 2 and
:class:`ResourceGuardError` to exit status 3.
"""


class SpecgapError(Exception):
    """Base class for library errors."""


class ValidationError(SpecgapError, ValueError):
    """Input violates a documented precondition or schema clause."""


class MalformedInputError(ValidationError):
    """A file or in-memory value could not be parsed or is out of range."""


class DomainError(ValidationError):
    """Argument outside the mathematical domain of an operation."""


class ResourceGuardError(SpecgapError):
    """Requested problem size exceeds a configured guard."""


class ConvergenceError(SpecgapError):
    """Iterative eigensolver stopped before reaching the residual tolerance.

    Attributes
    ----------
    eigenvalues : ndarray
        Best Ritz values available when the solver gave up.
    residuals : ndarray
        Residual norms belonging to ``eigenvalues``.
    """

    def __init__(self, message, eigenvalues=None, residuals=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues
        self.residuals = residuals
