""" Result containers shared by every propagation method """
from __future__ import annotations
from typing import Any, Dict, List, Optional
import numpy as np
from pydantic import BaseModel, Field, computed_field
from src.config.enums import Method

NORM_ACCEPTANCE = 1e-4
COLUMNS = ("time", "pz", "pz_stderr", "norm", "e_spin", "e_rest", "e_total")


class ObservableSeries(BaseModel):
    """P_z, norm and energies of one method on a fixed time grid."""
    method: Method
    times: np.ndarray
    pz: np.ndarray
    pz_stderr: np.ndarray
    norm: np.ndarray
    e_spin: np.ndarray
    e_rest: np.ndarray
    e_total: np.ndarray
    fingerprint: Dict[str, Any] = Field(default_factory=dict)
    components: Optional[np.ndarray] = None
    diagnostics: Dict[str, Any] = Field(default_factory=dict)
    warnings: List[str] = Field(default_factory=list)

    @classmethod
    def deterministic(cls, method: Method, times: np.ndarray, pz: np.ndarray, norm: np.ndarray,
                      e_spin: np.ndarray, e_rest: np.ndarray, e_total: np.ndarray, **kw: Any) -> "ObservableSeries":
        return cls(method=method, times=times, pz=pz, pz_stderr=np.zeros_like(pz), norm=norm,
                   e_spin=e_spin, e_rest=e_rest, e_total=e_total, **kw)

    @classmethod
    def from_members(cls, method: Method, times: np.ndarray, pz: np.ndarray, norm: np.ndarray,
                     e_spin: np.ndarray, e_rest: np.ndarray, e_total: np.ndarray, **kw: Any) -> "ObservableSeries":
        """Ensemble mean with standard error from member arrays of shape (N, len(times))"""
        n = pz.shape[0]
        stderr = pz.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.full(pz.shape[1], np.nan)
        return cls(method=method, times=times, pz=pz.mean(axis=0), pz_stderr=stderr,
                   norm=norm.mean(axis=0), e_spin=e_spin.mean(axis=0), e_rest=e_rest.mean(axis=0),
                   e_total=e_total.mean(axis=0), components=pz, **kw)

    @computed_field
    @property
    def is_accepted(self) -> bool:
        """Norm and P_z bounds hold at every sample"""
        bound = 1.0 + 3.0 * np.nan_to_num(self.pz_stderr) + 1e-12
        return bool(np.all(np.abs(self.norm - 1.0) <= NORM_ACCEPTANCE) and np.all(np.abs(self.pz) <= bound))

    def columns(self) -> Dict[str, np.ndarray]:
        return {
            "time": self.times, "pz": self.pz, "pz_stderr": self.pz_stderr, "norm": self.norm,
            "e_spin": self.e_spin, "e_rest": self.e_rest, "e_total": self.e_total,
        }

    def flag(self, message: str) -> None:
        if message not in self.warnings:
            self.warnings.append(message)

    class Config:
        arbitrary_types_allowed = True


class FockExpansion(BaseModel):
    """Coefficients c±_{nj}(t) of |n⟩|+⟩ evolved in the truncated basis."""
    level: int
    times: np.ndarray
    c_plus: np.ndarray
    c_minus: np.ndarray

    @property
    def norm(self) -> np.ndarray:
        return (np.abs(self.c_plus) ** 2 + np.abs(self.c_minus) ** 2).sum(axis=1)

    @property
    def pz(self) -> np.ndarray:
        return (np.abs(self.c_plus) ** 2 - np.abs(self.c_minus) ** 2).sum(axis=1)

    def top_population(self, levels: int = 2) -> np.ndarray:
        """Population of the highest Fock levels per time"""
        return (np.abs(self.c_plus[:, -levels:]) ** 2 + np.abs(self.c_minus[:, -levels:]) ** 2).sum(axis=1)

    class Config:
        arbitrary_types_allowed = True
        frozen = True


class ComparisonResult(BaseModel):
    label: str = ""
    sup_norm: float
    rms: float
    first_divergence_time: Optional[float] = None

    def agrees(self, threshold: float = 0.05) -> bool:
        return self.sup_norm < threshold

    class Config:
        frozen = True
