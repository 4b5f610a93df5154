"""Exception hierarchy shared by the numerical routes and the CLI."""


class GapflowError(Exception):
    """Base class for all package errors."""


class ParameterDomainError(GapflowError, ValueError):
    """Ensemble or method parameters outside their admissible range."""


class NumericalError(GapflowError, ArithmeticError):
    """A computation failed to produce a trustworthy number.

    ``last_good`` optionally carries the last abscissa at which the
    computation was still healthy (used by the ODE drivers).
    """

    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good


class SingularityError(NumericalError):
    """Evaluation at or too close to a singular point of an equation."""
