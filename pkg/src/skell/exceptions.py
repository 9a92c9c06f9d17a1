"""Exception hierarchy shared by the library and the CLI."""


class SkellError(Exception):
    """Base class for all errors raised by skell."""

    exit_code = 2


class ValidationError(SkellError, ValueError):
    """Inputs violate a documented invariant (non-PD matrix, bad shape, ...)."""

    exit_code = 1


class NumericalError(SkellError, ArithmeticError):
    """A numerical routine could not deliver its documented accuracy."""

    exit_code = 2


class QuadratureError(NumericalError):
    """Adaptive quadrature did not converge; carries the residual estimate."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual estimate {residual:.3g})")
        self.residual = residual


class MomentNotFoundError(NumericalError):
    """A requested moment does not exist for the chosen generator."""


class RangeError(NumericalError):
    """Argument outside the range where a kernel is representable in doubles."""
