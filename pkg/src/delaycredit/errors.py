"""Exception hierarchy shared by every pricing route."""


class DelayCreditError(Exception):
    """Base class for all package errors."""


class DomainError(DelayCreditError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class OutOfRangeError(DomainError):
    """A time lookup falls outside the interval covered by a path."""

    def __init__(self, message: str, required: tuple[float, float] | None = None):
        super().__init__(message)
        self.required = required


class ConfigurationError(DelayCreditError, ValueError):
    """Model or simulation settings are inconsistent."""


class SimulationError(DelayCreditError, RuntimeError):
    """A simulated path left the admissible region (e.g. V <= 0 under plain Euler)."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class WindowError(DelayCreditError, ValueError):
    """The delayed volatility integral is not fully determined by the observed history.

    Closed-form, PDE and heat-kernel routes require ``T - t <= L2``; longer
    horizons must be priced by Monte Carlo.
    """


class NumericalInstabilityError(DelayCreditError, ArithmeticError):
    """The finite-difference system lost diagonal dominance."""
