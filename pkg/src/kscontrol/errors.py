"""Exception types raised across the package."""


class KSControlError(Exception):
    """Base class for all package errors."""


class DimensionError(KSControlError, ValueError):
    """Array shape does not match the mesh."""


class DomainError(KSControlError, ValueError):
    """Input outside the domain of a transform (e.g. log of a nonpositive value)."""


class ConstructionError(KSControlError, ValueError):
    """A geometric object (profile, cutoff) cannot be built from the given data."""


class ParameterError(KSControlError, ValueError):
    """Weight or solver parameters violate an admissibility condition."""


class HypothesisError(KSControlError, ValueError):
    """A standing hypothesis on the coefficients fails (e.g. B not positive)."""


class StabilityError(KSControlError, RuntimeError):
    """Implicit step matrix is singular or numerically unusable."""


class DivergenceError(KSControlError, RuntimeError):
    """A time march exceeded the blow-up threshold."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ConvergenceError(KSControlError, RuntimeError):
    """An iterative method stopped before reaching its tolerance."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
