"""Exception types shared across the package."""


class DissipSdeError(Exception):
    """Base class for all package errors."""


class IterationLimit(DissipSdeError):
    """A bracketing/bisection loop exceeded its iteration budget."""


class DimensionMismatch(DissipSdeError):
    """Vector arguments have inconsistent dimensions."""


class InvalidSigma(DissipSdeError):
    """Supplied diffusion matrix is not symmetric positive definite."""


class SingularSigma(DissipSdeError):
    """A solve against sigma failed."""


class NonFiniteState(DissipSdeError):
    """An integration step produced a non-finite coordinate."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class InfeasibleQ(DissipSdeError):
    """The default q-coefficient rule is infeasible for the given spectrum."""


class DivergentTail(DissipSdeError):
    """Tail integral of 1/Phi diverges; Phi fails the superlinearity screen."""


class NotLinearModel(DissipSdeError):
    """A closed-form OU oracle was requested for a model with nonzero drift."""


class ConfigError(DissipSdeError):
    """Invalid experiment or model specification."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
