"""
Exact propagation of the Rabi model in the truncated spin ⊗ Fock basis.
Basis ordering: index s·j_max + j with s = 0 for spin up (+) and s = 1 for spin down (−).
"""
from __future__ import annotations
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, Optional, Sequence
import numpy as np
from scipy.linalg import eigh
from src.config.enums import Method
from src.core.special import boltzmann_weights
from src.models.domain import ModelParams, ThermalConfig
from src.models.series import FockExpansion, ObservableSeries

logger = logging.getLogger(__name__)

TOP_POPULATION_LIMIT = 1e-6
UNITARITY_LIMIT = 1e-10


def build_hamiltonian(params: ModelParams, j_max: int) -> np.ndarray:
    """H = ε/2 σz + V σx + ħω a†a + λ/2 σz (a† + a) on 2·j_max states."""
    if j_max < 2:
        raise ValueError(f"j_max must be at least 2, got {j_max}")
    j = np.arange(j_max)
    up, down = j, j + j_max
    H = np.zeros((2 * j_max, 2 * j_max), dtype=complex)
    H[up, up] = 0.5 * params.epsilon + j * params.hw
    H[down, down] = -0.5 * params.epsilon + j * params.hw
    H[up, down] = H[down, up] = params.V
    ladder = 0.5 * params.lam * np.sqrt(j[:-1] + 1.0)
    H[up[:-1], up[1:]] = H[up[1:], up[:-1]] = ladder
    H[down[:-1], down[1:]] = H[down[1:], down[:-1]] = -ladder
    return H


@dataclass(frozen=True)
class SpectralPropagator:
    """Eigendecomposition H = U Λ U† reused for every initial level and time."""
    hamiltonian: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray
    hbar: float

    @property
    def residual(self) -> float:
        """‖HU − UΛ‖_max relative to ‖H‖_max"""
        defect = self.hamiltonian @ self.vectors - self.vectors * self.energies
        return float(np.max(np.abs(defect)) / max(np.max(np.abs(self.hamiltonian)), 1e-300))

    def evolve_levels(self, levels: Sequence[int], t_grid: np.ndarray) -> np.ndarray:
        """ψ(t) for initial basis states `levels`, shape (len(t), dim, len(levels))."""
        start = self.vectors.conj().T[:, list(levels)]
        phases = np.exp(-1j * np.outer(np.asarray(t_grid, dtype=float), self.energies) / self.hbar)
        return np.einsum("ik,tk,kl->til", self.vectors, phases, start, optimize=True)


@lru_cache(maxsize=16)
def spectral_propagator(params: ModelParams, j_max: int) -> SpectralPropagator:
    H = build_hamiltonian(params, j_max)
    energies, vectors = eigh(H)
    for arr in (H, energies, vectors):
        arr.setflags(write=False)
    propagator = SpectralPropagator(H, energies, vectors, params.hbar)
    logger.debug(f"Diagonalized H (dim {2 * j_max}), residual {propagator.residual:.2e}")
    return propagator


def _top_population(psi: np.ndarray, j_max: int, levels: int = 2) -> np.ndarray:
    top = np.abs(psi[:, j_max - levels:j_max, :]) ** 2 + np.abs(psi[:, 2 * j_max - levels:, :]) ** 2
    return top.sum(axis=1)


def propagate_fock_initial(n: int, params: ModelParams, config: ThermalConfig, t_grid: np.ndarray) -> FockExpansion:
    """Evolve |n⟩|+⟩ by e^{−iHt/ħ} in the truncated basis."""
    j_max = config.expand_trunc_jmax
    if not 0 <= n < j_max:
        raise ValueError(f"initial level {n} outside the truncated basis of size {j_max}")
    psi = spectral_propagator(params, j_max).evolve_levels([n], t_grid)
    top = float(_top_population(psi, j_max).max())
    if top > TOP_POPULATION_LIMIT:
        logger.warning(f"Level {n}: top Fock population {top:.2e} exceeds {TOP_POPULATION_LIMIT:.0e}; raise j_max")
    return FockExpansion(level=n, times=np.asarray(t_grid, dtype=float),
                         c_plus=psi[:, :j_max, 0], c_minus=psi[:, j_max:, 0])


def population_difference_qm(beta: float, params: ModelParams, config: ThermalConfig, t_grid: np.ndarray,
                             fingerprint: Optional[Dict[str, Any]] = None) -> ObservableSeries:
    """Boltzmann-weighted P_z of the exact propagations of levels 0..N_T."""
    config = config.escalated(params)
    j_max, n_t = config.expand_trunc_jmax, config.boltzmann_trunc_NT
    if n_t >= j_max:
        raise ValueError(f"N_T={n_t} must be smaller than j_max={j_max}")
    t = np.asarray(t_grid, dtype=float)
    weights, tail = boltzmann_weights(n_t, beta, params)
    propagator = spectral_propagator(params, j_max)
    psi = propagator.evolve_levels(range(n_t + 1), t)
    c_plus, c_minus = psi[:, :j_max, :], psi[:, j_max:, :]

    pz_levels = (np.abs(c_plus) ** 2 - np.abs(c_minus) ** 2).sum(axis=1)
    norm_levels = (np.abs(psi) ** 2).sum(axis=1)
    sx_levels = 2.0 * np.real(np.conj(c_plus) * c_minus).sum(axis=1)
    h_psi = np.einsum("ij,tjl->til", propagator.hamiltonian, psi, optimize=True)
    energy_levels = np.real(np.conj(psi) * h_psi).sum(axis=1)

    pz = pz_levels @ weights
    e_total = energy_levels @ weights
    e_spin = params.V * (sx_levels @ weights)
    e_rest = e_total - e_spin - 0.5 * params.epsilon * pz

    series = ObservableSeries.deterministic(
        Method.EXACT, t, pz, norm_levels @ weights, e_spin, e_rest, e_total,
        fingerprint=fingerprint or {}, components=pz_levels.T.copy(),
        diagnostics={"boltzmann_tail": tail, "eigen_residual": propagator.residual,
                     "boltzmann_trunc_NT": n_t},
    )
    top = _top_population(psi, j_max).max(axis=0)
    for n in np.flatnonzero(top > TOP_POPULATION_LIMIT):
        series.flag(f"exact level {n}: top Fock population {top[n]:.2e} exceeds {TOP_POPULATION_LIMIT:.0e}")
    drift = float(np.max(np.abs(norm_levels - 1.0)))
    if drift > UNITARITY_LIMIT:
        series.flag(f"exact: unitarity defect {drift:.2e}")
    for message in series.warnings:
        logger.warning(message)
    logger.info(f"Exact reference finished: N_T={n_t}, j_max={j_max}, Boltzmann tail {tail:.2e}")
    return series
