"""Exception hierarchy.

Validation problems derive from :class:`ValueError` so that sklearn-style
callers can keep catching the usual type; numerical breakdowns derive from
:class:`NumericalError`. The CLI maps the two families to exit codes 2 and 3.
"""


class LearnquadError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(LearnquadError, ValueError):
    """An argument violates a documented precondition."""


class NumericalError(LearnquadError, ArithmeticError):
    """A computation produced non-finite values or failed to converge."""


class NonFiniteIntegrandError(NumericalError):
    def __init__(self, index, value):
        self.index = index
        self.value = value
        super().__init__(f"integrand returned {value!r} at node {index}")


class DivergedTrainingError(NumericalError):
    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch} (loss={loss!r})")


class GenerationDivergedError(NumericalError):
    """ODE integration of the generative map left the finite range."""


class EllipticityError(NumericalError):
    def __init__(self, point, value):
        self.point = point
        self.value = value
        where = "an unknown point" if point is None else f"point {tuple(point)}"
        super().__init__(f"inadmissible conductivity {value!r} at {where}")


class SolverError(NumericalError):
    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message if residual is None else f"{message} (residual={residual:.3e})")


class InternalError(LearnquadError, RuntimeError):
    """An internal consistency check failed."""
