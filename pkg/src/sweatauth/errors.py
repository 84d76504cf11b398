"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A spec, parameter file, or experiment config is invalid or incomplete."""


class InsufficientDataError(ValueError):
    """Not enough samples/users/scores to perform the requested computation."""


class IntegrationError(ArithmeticError):
    """ODE integration failed (non-finite state or step-size underflow).

    Carries the macro step index at which the failure occurred.
    """

    def __init__(self, message, step=None, sim=None):
        if step is not None:
            message = f"{message} (step {step}" + (f", sim {sim})" if sim is not None else ")")
        super().__init__(message)
        self.step = step
        self.sim = sim
