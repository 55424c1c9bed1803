"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or argument value."""


class ShapeError(ValueError):
    """Array shapes do not agree."""


class NonFiniteError(ArithmeticError):
    """A NaN or infinity showed up where a finite value is required.

    ``where`` names the offending tensor or step so the caller can report it.
    """

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class DenominatorError(ZeroDivisionError):
    """A closed-form expression hit a vanishing denominator."""


class DegenerateEnsembleError(ValueError):
    """Kernel ensemble cannot be built because all responses coincide."""


class TrainingDiverged(RuntimeError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []
