""" Centralized enumerations for methods, integration modes and output formats """
from enum import Enum
from typing import List


class Method(str, Enum):
    """Propagation methods with helper methods"""
    EXACT = "exact"
    D1 = "d1"
    TA = "ta"
    STOCHASTIC = "stochastic"
    PFUNCTION = "pfunction"
    BOLTZMANN = "boltzmann"
    COMPARE_ALL = "compare-all"

    def is_thermal(self) -> bool:
        """Check if the method depends on temperature"""
        return self is not Method.D1

    def is_ensemble(self) -> bool:
        """Check if the method averages over sampled trajectories"""
        return self in {Method.STOCHASTIC, Method.PFUNCTION}

    def is_davydov(self) -> bool:
        """Check if the method propagates Davydov D1 trajectories"""
        return self in {Method.D1, Method.TA, Method.STOCHASTIC, Method.PFUNCTION, Method.BOLTZMANN}

    @property
    def display_name(self) -> str:
        _names = {
            "exact": "exact reference",
            "d1": "Davydov D1 (T=0)",
            "ta": "thermally averaged Davydov",
            "stochastic": "stochastic Davydov",
            "pfunction": "P-function Davydov",
            "boltzmann": "Boltzmann-averaged Davydov",
            "compare-all": "comparison of all methods",
        }
        return _names[self.value]

    @classmethod
    def comparison_set(cls) -> List["Method"]:
        """Methods run by compare-all, exact reference first"""
        return [cls.EXACT, cls.D1, cls.TA, cls.STOCHASTIC, cls.PFUNCTION, cls.BOLTZMANN]

    @classmethod
    def from_value(cls, value: str) -> "Method":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower().replace("_", "-"))
        except ValueError:
            raise ValueError(f"Unknown method: {value!r}")


class IntegrationMode(str, Enum):
    """Full equations of motion or the simplified driven-oscillator f, g equations"""
    FULL = "full"
    SIMPLIFIED = "simplified"

    @property
    def is_simplified(self) -> bool:
        return self is IntegrationMode.SIMPLIFIED

    @classmethod
    def from_value(cls, value: str) -> "IntegrationMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"Unknown integration mode: {value!r}")


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"

    @property
    def extension(self) -> str:
        return f".{self.value}"
