"""Exception hierarchy shared by all modules."""


class OptosqueezeError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(OptosqueezeError, ValueError):
    pass


class DomainError(OptosqueezeError, ValueError):
    """A closed-form expression is evaluated outside its region of validity."""


class ConvergenceError(OptosqueezeError, RuntimeError):
    pass


class SingularityError(OptosqueezeError, ArithmeticError):
    pass


class StabilityError(OptosqueezeError, RuntimeError):
    """The drift matrix has an eigenvalue with non-negative real part."""


class DivergenceError(OptosqueezeError, RuntimeError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class NumericalError(OptosqueezeError, ArithmeticError):
    pass
