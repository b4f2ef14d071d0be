"""Per-invocation run configuration: defaults, optional JSON file, then explicit flags."""
from __future__ import annotations
import json, logging, math
from typing import Any, Dict, Optional
import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from src.config.enums import IntegrationMode, Method, OutputFormat
from src.models.domain import IntegratorConfig, ModelParams, ThermalConfig, fingerprint
from src.services.exceptions import ConfigurationError
from src.utils.validators import Validators

logger = logging.getLogger(__name__)

# Short names accepted in config files besides the field names
KEY_ALIASES = {
    "lambda": "lam", "T": "temperature", "N": "realizations", "N_s": "samples",
    "M": "fock_trunc_M", "N_T": "boltzmann_trunc_NT", "j_max": "expand_trunc_jmax",
}


class RunConfig(BaseModel):
    method: Method = Method.EXACT
    epsilon: float = 0.0
    V: float = -0.05
    omega: float = 1.0
    lam: float = Field(0.2, alias="lambda")
    hbar: float = 1.0
    kB: float = 1.0
    temperature: Optional[float] = 1.0
    mode: IntegrationMode = IntegrationMode.SIMPLIFIED
    realizations: int = 100
    samples: int = 100
    fock_trunc_M: int = 7
    boltzmann_trunc_NT: int = 7
    expand_trunc_jmax: int = 14
    tail_tolerance: Optional[float] = None
    t_max: float = 200.0
    dt_out: float = 0.1
    seed: int = 12345
    output: Optional[str] = None
    format: OutputFormat = OutputFormat.CSV
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    regularization_floor: float = 1e-12
    initial_perturbation: float = 0.0
    g_phase: float = 0.0
    allow_warnings: bool = False

    @field_validator("method", mode="before")
    @classmethod
    def parse_method(cls, v: Any) -> Any:
        return Method.from_value(v) if isinstance(v, str) else v

    @field_validator("mode", mode="before")
    @classmethod
    def parse_mode(cls, v: Any) -> Any:
        return IntegrationMode.from_value(v) if isinstance(v, str) else v

    @field_validator("format", mode="before")
    @classmethod
    def parse_format(cls, v: Any) -> Any:
        return v.strip().lower() if isinstance(v, str) and not isinstance(v, OutputFormat) else v

    @model_validator(mode="after")
    def check_consistency(self) -> "RunConfig":
        checks = [
            Validators.validate_temperature(self.method, self.temperature),
            Validators.validate_truncations(self.fock_trunc_M, self.boltzmann_trunc_NT, self.expand_trunc_jmax, self.method),
            Validators.validate_time_grid(self.t_max, self.dt_out),
            Validators.validate_output_path(self.output),
        ]
        if self.method in (Method.STOCHASTIC, Method.COMPARE_ALL):
            checks.append(Validators.validate_ensemble_size(self.realizations, "realizations"))
        if self.method in (Method.PFUNCTION, Method.COMPARE_ALL):
            checks.append(Validators.validate_ensemble_size(self.samples, "samples"))
        for result in checks:
            if not result.is_valid:
                raise ValueError(f"{result.field}: {result.error_message}")
        builders = [self.params, self.integrator] + ([self.thermal] if self.method.is_thermal() else [])
        for build in builders:
            try:
                build()
            except ValidationError as e:
                error = e.errors()[0]
                raise ValueError(f"{error['loc'][0] if error['loc'] else 'config'}: {error['msg']}")
        return self

    @classmethod
    def from_sources(cls, config_file: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None,
                     defaults: Optional[Dict[str, Any]] = None) -> "RunConfig":
        """Layer defaults, file values and non-None overrides; errors become ConfigurationError."""
        values: Dict[str, Any] = normalize_keys(defaults or {})
        if config_file:
            try:
                with open(config_file, "r") as f:
                    loaded = json.load(f)
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigurationError("config", f"cannot read {config_file}: {e}")
            if not isinstance(loaded, dict):
                raise ConfigurationError("config", f"{config_file} must hold a JSON object")
            values.update(normalize_keys(loaded))
            logger.info(f"Loaded run configuration from {config_file}")
        values.update(normalize_keys({k: v for k, v in (overrides or {}).items() if v is not None}))
        try:
            return cls(**values)
        except ValidationError as e:
            error = e.errors()[0]
            field = ".".join(str(part) for part in error["loc"]) or "config"
            detail = str(error["msg"]).removeprefix("Value error, ")
            if ":" in detail and field == "config":
                field, detail = (part.strip() for part in detail.split(":", 1))
            raise ConfigurationError(field, detail)

    @property
    def beta(self) -> float:
        if not self.method.is_thermal() and not self.temperature:
            return math.inf
        return self.params().beta_from_temperature(self.temperature)

    def params(self) -> ModelParams:
        return ModelParams(epsilon=self.epsilon, V=self.V, omega=self.omega, lam=self.lam, hbar=self.hbar, kB=self.kB)

    def thermal(self) -> ThermalConfig:
        return ThermalConfig(beta=self.beta, fock_trunc_M=self.fock_trunc_M, boltzmann_trunc_NT=self.boltzmann_trunc_NT,
                             expand_trunc_jmax=self.expand_trunc_jmax, tail_tolerance=self.tail_tolerance)

    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(rel_tol=self.rel_tol, abs_tol=self.abs_tol, max_step=self.max_step,
                                regularization_floor=self.regularization_floor, mode=self.mode,
                                initial_perturbation=self.initial_perturbation)

    def t_grid(self) -> np.ndarray:
        steps = int(round(self.t_max / self.dt_out))
        return np.arange(steps + 1) * self.dt_out

    def fingerprint(self, method: Optional[Method] = None) -> Dict[str, Any]:
        method = method or self.method
        thermal = self.thermal() if method.is_thermal() else None
        extra: Dict[str, Any] = {"method": method.value, "t_max": self.t_max, "dt_out": self.dt_out}
        if method.is_ensemble():
            extra["seed"] = self.seed
        if method is Method.STOCHASTIC:
            extra["realizations"] = self.realizations
        elif method is Method.PFUNCTION:
            extra["samples"] = self.samples
        elif method is Method.BOLTZMANN:
            extra.update(g_phase=self.g_phase)
        return fingerprint(self.params(), thermal, self.integrator() if method.is_davydov() else None, **extra)

    class Config:
        populate_by_name = True
        extra = 'forbid'
        frozen = True


def normalize_keys(values: Dict[str, Any]) -> Dict[str, Any]:
    """Accept kebab-case and short aliases for every field."""
    normalized: Dict[str, Any] = {}
    for key, value in values.items():
        key = str(key).replace("-", "_")
        key = KEY_ALIASES.get(key, key)
        normalized[key] = value
    return normalized
