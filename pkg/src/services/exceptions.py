"""Custom exceptions for the simulation layer."""
from typing import Any, Dict, Optional


class SimulationError(Exception):
    def __init__(self, message: str = "An unspecified simulation error occurred."):
        self.message = message
        super().__init__(self.message)


class ConfigurationError(SimulationError):
    """Raised when a run configuration field is missing or invalid."""
    def __init__(self, field: str, detail: str):
        self.field = field
        self.detail = detail
        super().__init__(f"Invalid configuration for '{field}': {detail}")

    def __str__(self):
        return f"ConfigurationError[{self.field}]: {self.detail}"


class IntegrationError(SimulationError):
    def __init__(self, time: float, state: Any = None, reason: str = "integration failed"):
        self.time = time
        self.state = state
        self.reason = reason
        super().__init__(f"{reason} at t={time:.6g}")

    def __str__(self):
        return f"{self.reason} at t={self.time:.6g} (state={self.state})"


class StepSizeUnderflowError(IntegrationError):
    def __init__(self, time: float, state: Any = None):
        super().__init__(time, state, "step size underflow")


class NonFiniteDerivativeError(IntegrationError):
    def __init__(self, time: float, state: Any = None):
        super().__init__(time, state, "non-finite derivative")


class PrecisionLossError(SimulationError):
    def __init__(self, dim: int, detail: str):
        self.dim = dim
        self.detail = detail
        super().__init__(f"Precision lost at dimension {dim}: {detail}")


class GridMismatchError(SimulationError):
    def __init__(self, len_a: int, len_b: int, detail: Optional[str] = None):
        self.len_a = len_a
        self.len_b = len_b
        super().__init__(detail or f"Time grids differ ({len_a} vs {len_b} points)")


class EnsembleError(SimulationError):
    """All-or-nothing refusal of an ensemble with failed members."""
    def __init__(self, failures: Dict[int, str], label: str = "member"):
        self.failures = dict(sorted(failures.items()))
        self.label = label
        listed = ", ".join(f"{label} {i}: {reason}" for i, reason in self.failures.items())
        super().__init__(f"{len(self.failures)} {label}(s) failed: {listed}")


# base alias for global typing and external catching
SIMULATION_ERRORS = (ConfigurationError, IntegrationError, PrecisionLossError, GridMismatchError, EnsembleError)
