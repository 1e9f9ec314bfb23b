"""Exception hierarchy and warning categories shared across the package."""


class IcamixtureError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(IcamixtureError):
    """An argument violates a documented precondition (non-finite entries,
    shape mismatch, zero row/column where one is forbidden, ...)."""


class NumericalError(IcamixtureError):
    """A numerical routine failed to produce a usable result."""


class DegenerateCovarianceError(NumericalError):
    """A covariance (or Gram) matrix has an eigenvalue at or below the
    relative floor, so whitening / inverse square roots are unreliable.

    Carries the offending eigenvalue so callers can report it or decide
    to retry after dimension reduction.
    """

    def __init__(self, message, eigenvalue):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class SingularMatrixError(NumericalError):
    """A matrix inversion was requested for a (near-)singular matrix."""


class EmptyComponentError(IcamixtureError):
    """A weighted operation received weights summing to zero."""


class DyingComponentError(IcamixtureError):
    """A mixture component's weight stayed below the configured floor for
    several consecutive iterations and the fit was configured to abort."""

    def __init__(self, message, component):
        super().__init__(message)
        self.component = component


class DataError(IcamixtureError):
    """A dataset could not be parsed or fails a structural requirement.

    ``row`` and ``column`` are 1-based locations when they are known,
    otherwise None.
    """

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class FitWarning(UserWarning):
    """Non-fatal diagnostics emitted while fitting."""


class DyingComponentWarning(FitWarning):
    """A component's weight dropped below the configured floor."""
