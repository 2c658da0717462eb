"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of a function."""


class DivergenceError(DomainError):
    """A requested integral or moment is infinite for these parameters."""


class PreconditionError(ValueError):
    """A closed form was requested outside the regime where it holds."""


class InfeasibleAdaptationError(ValueError):
    """A beam-adaptation target cannot be met by any sectored pattern."""


class ConfigError(ValueError):
    """A run configuration failed validation."""


class NonConvergenceError(RuntimeError):
    """Adaptive quadrature ran out of subdivisions.

    The best available estimate and its error bound travel with the
    exception so callers can decide whether it is usable anyway.
    """

    def __init__(self, message, estimate, abs_error):
        super().__init__(f"{message} (estimate={estimate!r}, abs_error={abs_error!r})")
        self.estimate = estimate
        self.abs_error = abs_error
