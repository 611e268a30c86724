"""Exception hierarchy shared by all modules."""


class SpinpropError(Exception):
    """Base class for every error raised by this package."""


class PreconditionError(SpinpropError, ValueError):
    """An argument violates a documented precondition."""


class FieldDomainError(SpinpropError, ValueError):
    """A field program was evaluated outside ``[0, t_max]``."""


class FieldConfigError(SpinpropError, ValueError):
    """A field program was declared inconsistently.

    ``code`` classifies the problem for machine-readable reports.
    """

    def __init__(self, message, code="invalid_field"):
        self.code = code
        super().__init__(message)


class ClosureError(SpinpropError):
    """A trajectory expected to be closed is not."""

    def __init__(self, residual, tol):
        self.residual = float(residual)
        self.tol = float(tol)
        super().__init__(
            f"trajectory not closed: closure residual {self.residual:.3e} exceeds {self.tol:.1e}"
        )


class IntegrationAccuracyError(SpinpropError):
    """Numerical integration is too coarse for the requested check; raise ``steps``."""


class NotApplicableError(SpinpropError):
    """The analysis premise does not hold for this program and interval."""
