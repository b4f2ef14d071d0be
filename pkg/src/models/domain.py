from __future__ import annotations
import logging, math
from typing import Any, Dict, List, Optional
import numpy as np
from pydantic import BaseModel, Field, field_validator, computed_field
from src.config.enums import IntegrationMode

logger = logging.getLogger(__name__)


def _finite(v: float) -> float:
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


class ModelParams(BaseModel):
    """Constants of the Rabi Hamiltonian; zero-point energy suppressed."""
    epsilon: float = 0.0
    V: float = -0.05
    omega: float = Field(1.0, gt=0)
    lam: float = Field(0.2, alias="lambda")
    hbar: float = Field(1.0, gt=0)
    kB: float = Field(1.0, gt=0)

    @field_validator("epsilon", "V", "omega", "lam", "hbar", "kB")
    @classmethod
    def check_finite(cls, v: float) -> float:
        return _finite(v)

    @property
    def hw(self) -> float:
        """Oscillator quantum ħω"""
        return self.hbar * self.omega

    def beta_from_temperature(self, temperature: float) -> float:
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        return 1.0 / (self.kB * temperature)

    class Config:
        populate_by_name = True
        extra = 'forbid'
        frozen = True


class ThermalConfig(BaseModel):
    beta: float = Field(1.0, gt=0)
    fock_trunc_M: int = Field(7, ge=1)
    boltzmann_trunc_NT: int = Field(7, ge=1)
    expand_trunc_jmax: int = Field(14, ge=2)
    tail_tolerance: Optional[float] = Field(None, gt=0, lt=1)

    @field_validator("beta")
    @classmethod
    def check_beta(cls, v: float) -> float:
        return _finite(v)

    def n_bar(self, params: ModelParams) -> float:
        """Thermal occupation 1/(e^{βħω} − 1), overflow-free"""
        q = math.exp(-self.beta * params.hw)
        return q / (1.0 - q) if q < 1.0 else math.inf

    def fock_tail(self, params: ModelParams) -> float:
        """Boltzmann weight dropped by keeping M Fock levels in |Φ⟩"""
        return math.exp(-self.beta * params.hw * self.fock_trunc_M)

    def boltzmann_tail(self, params: ModelParams) -> float:
        """Boltzmann weight dropped by summing levels 0..N_T"""
        return math.exp(-self.beta * params.hw * (self.boltzmann_trunc_NT + 1))

    def escalated(self, params: ModelParams) -> "ThermalConfig":
        """Raise M and N_T until both dropped tails are below tail_tolerance"""
        if self.tail_tolerance is None:
            return self
        needed = math.ceil(-math.log(self.tail_tolerance) / (self.beta * params.hw))
        M = max(self.fock_trunc_M, needed)
        NT = max(self.boltzmann_trunc_NT, needed - 1)
        if NT > self.expand_trunc_jmax - 1:
            logger.warning(f"N_T={NT} capped at j_max−1={self.expand_trunc_jmax - 1}; "
                           f"Boltzmann tail stays above {self.tail_tolerance:.0e}")
            NT = self.expand_trunc_jmax - 1
        if (M, NT) != (self.fock_trunc_M, self.boltzmann_trunc_NT):
            logger.info(f"Truncations escalated to M={M}, N_T={NT}")
        return self.model_copy(update={"fock_trunc_M": M, "boltzmann_trunc_NT": NT})

    class Config:
        extra = 'forbid'
        frozen = True


class IntegratorConfig(BaseModel):
    rel_tol: float = Field(1e-10, gt=0)
    abs_tol: float = Field(1e-12, gt=0)
    max_step: float = Field(math.inf, gt=0)
    regularization_floor: float = Field(1e-12, ge=0)
    mode: IntegrationMode = IntegrationMode.SIMPLIFIED
    initial_perturbation: float = Field(0.0, ge=0, lt=1)

    @field_validator("mode", mode="before")
    @classmethod
    def parse_mode(cls, v: Any) -> Any:
        return IntegrationMode.from_value(v) if isinstance(v, str) else v

    class Config:
        extra = 'forbid'
        frozen = True


class D1State(BaseModel):
    """Davydov D1 variational parameters (A, B, f, g)."""
    A: complex = 1.0 + 0j
    B: complex = 0j
    f: complex = 0j
    g: complex = 0j

    @classmethod
    def initial(cls, f0: complex = 0j, g0: complex = 0j, perturbation: float = 0.0) -> "D1State":
        """Spin up, optionally seeded with a small B(0) = δ"""
        return cls(A=math.sqrt(1.0 - perturbation ** 2), B=perturbation, f=f0, g=g0)

    @classmethod
    def from_vector(cls, y: np.ndarray) -> "D1State":
        return cls(A=complex(y[0]), B=complex(y[1]), f=complex(y[2]), g=complex(y[3]))

    def to_vector(self) -> np.ndarray:
        return np.array([self.A, self.B, self.f, self.g], dtype=complex)

    @computed_field
    @property
    def norm(self) -> float:
        return abs(self.A) ** 2 + abs(self.B) ** 2

    @computed_field
    @property
    def pz(self) -> float:
        return abs(self.A) ** 2 - abs(self.B) ** 2

    class Config:
        frozen = True


class SignRealization(BaseModel):
    """One random-sign Boltzmannized state |Φ_i⟩ with its v_0, v_1 vectors."""
    signs: List[int]
    seed: int
    index: int = 0
    v0: np.ndarray
    v1: np.ndarray
    tail: float = 0.0

    @field_validator("signs")
    @classmethod
    def check_signs(cls, v: List[int]) -> List[int]:
        if not v or any(s not in (-1, 1) for s in v):
            raise ValueError("signs must be a non-empty sequence of ±1")
        return v

    @property
    def M(self) -> int:
        return len(self.signs)

    @property
    def norm(self) -> float:
        return float(self.v0 @ self.v0)

    class Config:
        arbitrary_types_allowed = True
        frozen = True


class ThermalQuantities(BaseModel):
    """Normal (T) and anti-normal (U) ordered ladder moments in |Φ⟩."""
    T00: float = 1.0
    T01: float = 0.0
    T11: float = 0.0
    U11: float = 1.0

    class Config:
        frozen = True


class PSample(BaseModel):
    alpha: complex
    index: int = 0

    class Config:
        frozen = True


def fingerprint(params: ModelParams, thermal: Optional[ThermalConfig] = None,
                integrator: Optional[IntegratorConfig] = None, **extra: Any) -> Dict[str, Any]:
    """Flat, JSON-ready record of every parameter that shaped a result"""
    record: Dict[str, Any] = {f"model.{k}": v for k, v in params.model_dump(by_alias=True).items()}
    if thermal is not None:
        record.update({f"thermal.{k}": v for k, v in thermal.model_dump().items()})
    if integrator is not None:
        dumped = integrator.model_dump(mode="json")
        record.update({f"integrator.{k}": v for k, v in dumped.items()})
    record.update(extra)
    return record
