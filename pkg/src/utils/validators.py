"""Run-configuration validators with a standardized result format."""
import math, os
from dataclasses import dataclass
from typing import Any, Optional
from src.config.enums import Method


@dataclass
class ValidationResult:
    """Standardized result for all validation operations."""
    is_valid: bool
    cleaned_value: Optional[Any] = None
    error_message: Optional[str] = None
    field: Optional[str] = None


class Validators:
    """
    Static checks that span several RunConfig fields.
    Each method returns a `ValidationResult` object for consistent handling.
    """
    MAX_SAMPLES = 10_000_000
    MAX_FOCK_LEVELS = 300

    @staticmethod
    def validate_temperature(method: Method, temperature: Optional[float]) -> ValidationResult:
        """Thermal methods need T > 0; d1 ignores temperature."""
        if not method.is_thermal():
            return ValidationResult(True, temperature, field="temperature")
        if temperature is None or not math.isfinite(temperature) or temperature <= 0:
            return ValidationResult(False, None, f"{method.value} requires a positive finite temperature, got {temperature}",
                                    field="temperature")
        return ValidationResult(True, float(temperature), field="temperature")

    @staticmethod
    def validate_truncations(M: int, N_T: int, j_max: int, method: Method) -> ValidationResult:
        if M > Validators.MAX_FOCK_LEVELS or j_max > Validators.MAX_FOCK_LEVELS:
            return ValidationResult(False, None, f"truncations above {Validators.MAX_FOCK_LEVELS} levels lose precision",
                                    field="fock_trunc_M" if M > j_max else "expand_trunc_jmax")
        if method in (Method.EXACT, Method.COMPARE_ALL) and N_T >= j_max:
            return ValidationResult(False, None, f"N_T={N_T} must be smaller than j_max={j_max}",
                                    field="boltzmann_trunc_NT")
        return ValidationResult(True, (M, N_T, j_max))

    @staticmethod
    def validate_time_grid(t_max: float, dt_out: float) -> ValidationResult:
        """t_max must be a whole number of output steps (to 1e-9 relative)."""
        if not (math.isfinite(t_max) and t_max > 0):
            return ValidationResult(False, None, f"t_max must be positive, got {t_max}", field="t_max")
        if not (math.isfinite(dt_out) and 0 < dt_out <= t_max):
            return ValidationResult(False, None, f"dt_out must lie in (0, t_max], got {dt_out}", field="dt_out")
        steps = t_max / dt_out
        if abs(steps - round(steps)) > 1e-9 * max(steps, 1.0):
            return ValidationResult(False, None, f"t_max={t_max} is not a multiple of dt_out={dt_out}", field="dt_out")
        return ValidationResult(True, int(round(steps)))

    @staticmethod
    def validate_ensemble_size(count: int, field: str) -> ValidationResult:
        if count < 1:
            return ValidationResult(False, None, f"{field} must be at least 1", field=field)
        if count > Validators.MAX_SAMPLES:
            return ValidationResult(False, None, f"{field} exceeds {Validators.MAX_SAMPLES}", field=field)
        return ValidationResult(True, count, field=field)

    @staticmethod
    def validate_output_path(path: Optional[str]) -> ValidationResult:
        """Existing directories are accepted as-is; missing parents are created later."""
        if path is None:
            return ValidationResult(True, None, field="output")
        cleaned = os.path.expanduser(str(path).strip())
        if not cleaned:
            return ValidationResult(False, None, "output path is empty", field="output")
        if os.path.isfile(cleaned) and not os.access(cleaned, os.W_OK):
            return ValidationResult(False, None, f"output file {cleaned} is not writable", field="output")
        return ValidationResult(True, cleaned, field="output")
