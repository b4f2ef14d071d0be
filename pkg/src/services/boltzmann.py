"""
Boltzmann-averaged Davydov propagation.

Every oscillator eigenstate |n⟩ is propagated independently with Laguerre
weighted D1 equations; temperature enters only through the weights applied
to the per-level observables. The thermally averaged (TA) single trajectory
uses the generating-function average of the same equations.
"""
from __future__ import annotations
import cmath, logging
from typing import Any, Dict, Optional, Tuple
import numpy as np
from src.config.enums import IntegrationMode, Method
from src.core.runner import EnsembleRunner, run_ordered
from src.core.special import boltzmann_weights, mean_occupation
from src.models.domain import D1State, IntegratorConfig, ModelParams
from src.models.series import ObservableSeries
from src.services.davydov import (DavydovTrajectory, OverlapKernel, kernel_energies, kernel_rhs,
                                  propagate_d1, singular_term)

logger = logging.getLogger(__name__)


def boltzmann_rhs(state: D1State, n: int, params: ModelParams, mode: IntegrationMode = IntegrationMode.FULL,
                  floor: float = 1e-12) -> D1State:
    """Time derivatives of (A_n, B_n, f_n, g_n) for oscillator level n."""
    if n < 0:
        raise ValueError(f"level index must be non-negative, got {n}")
    return D1State.from_vector(kernel_rhs(state.to_vector(), params, mode, OverlapKernel.laguerre(n), floor))


def ta_rhs(state: D1State, beta: float, params: ModelParams, mode: IntegrationMode = IntegrationMode.FULL,
           floor: float = 1e-12) -> D1State:
    """Thermally averaged equations: L_n(y) → e^{−n̄y}, n → n̄."""
    kernel = OverlapKernel.thermal(mean_occupation(beta, params))
    return D1State.from_vector(kernel_rhs(state.to_vector(), params, mode, kernel, floor))


def initial_g(params: ModelParams, phase: float = 0.0) -> complex:
    """
    g_n(0) on the circle |g − λ/2ħω| = λ/2ħω, which keeps E_r constant under the Simplified
    f, g equations; phase 0 gives λ/ħω.
    """
    r = 0.5 * params.lam / params.hw
    return r + r * cmath.exp(1j * phase)


def spin_and_rest_energy(state: D1State, n: int, params: ModelParams) -> Tuple[float, float]:
    e_spin, e_rest, _ = kernel_energies(state.to_vector()[None, :], params, OverlapKernel.laguerre(n))
    return float(e_spin[0]), float(e_rest[0])


def singular_term_magnitude(state: D1State, n: int, params: ModelParams, floor: float = 1e-12) -> float:
    """|first term of ḟ_n|, the one carrying 1/A_n."""
    return float(singular_term(state.to_vector()[None, :], params, OverlapKernel.laguerre(n), floor)[0])


def level_initial(params: ModelParams, integrator_config: IntegratorConfig, g_phase: float = 0.0) -> D1State:
    g0 = initial_g(params, g_phase) if integrator_config.mode.is_simplified else 0j
    return D1State.initial(f0=0j, g0=g0, perturbation=integrator_config.initial_perturbation)


def propagate_level(n: int, params: ModelParams, integrator_config: IntegratorConfig, t_grid: np.ndarray,
                    g_phase: float = 0.0) -> DavydovTrajectory:
    return propagate_d1(level_initial(params, integrator_config, g_phase), params, integrator_config, t_grid,
                        kernel=OverlapKernel.laguerre(n), label=f"level {n}")


async def run_boltzmann(N_T: int, beta: float, params: ModelParams, integrator_config: IntegratorConfig,
                        t_grid: np.ndarray, g_phase: float = 0.0, runner: Optional[EnsembleRunner] = None,
                        fingerprint: Optional[Dict[str, Any]] = None) -> ObservableSeries:
    """P_z^B = Σ_n ρ_n P_z^n over levels 0..N_T, weights renormalized on the truncated sum."""
    if N_T < 1:
        raise ValueError(f"N_T must be at least 1, got {N_T}")
    weights, tail = boltzmann_weights(N_T, beta, params)
    floor = integrator_config.regularization_floor

    def member(n: int) -> DavydovTrajectory:
        return propagate_level(n, params, integrator_config, t_grid, g_phase)

    logger.info(f"Boltzmann propagation: levels 0..{N_T}, mode={integrator_config.mode.value}")
    trajectories = await run_ordered(member, range(N_T + 1), runner, label="level")

    pz_levels = np.stack([tr.pz for tr in trajectories])
    norm_levels = np.stack([tr.norm for tr in trajectories])
    energy_levels = [np.stack(parts) for parts in zip(*(tr.energies(params) for tr in trajectories))]
    singular = np.stack([singular_term(tr.states, params, tr.kernel, floor) for tr in trajectories])
    diagnostics: Dict[str, Any] = {
        "boltzmann_tail": tail, "boltzmann_trunc_NT": N_T, "weights": weights.tolist(),
        "singular_terms": singular,
        "max_norm_drift": max(tr.diagnostics["norm_drift"] for tr in trajectories),
    }
    if integrator_config.mode is IntegrationMode.FULL:
        diagnostics["min_abs_A"] = [tr.diagnostics.get("min_abs_A") for tr in trajectories]

    series = ObservableSeries.deterministic(
        Method.BOLTZMANN, np.asarray(t_grid, dtype=float), weights @ pz_levels, weights @ norm_levels,
        *(weights @ e for e in energy_levels), fingerprint=fingerprint or {},
        components=pz_levels, diagnostics=diagnostics,
    )
    for trajectory in trajectories:
        for message in trajectory.warnings:
            series.flag(message)
    return series


def run_ta(beta: float, params: ModelParams, integrator_config: IntegratorConfig, t_grid: np.ndarray,
           fingerprint: Optional[Dict[str, Any]] = None) -> ObservableSeries:
    """Single trajectory of the thermally averaged equations."""
    n_bar = mean_occupation(beta, params)
    shift = params.lam / params.hw if integrator_config.mode.is_simplified else 0.0
    initial = D1State.initial(g0=shift, perturbation=integrator_config.initial_perturbation)
    trajectory = propagate_d1(initial, params, integrator_config, t_grid,
                              kernel=OverlapKernel.thermal(n_bar), label="ta")
    series = ObservableSeries.deterministic(
        Method.TA, trajectory.times, trajectory.pz, trajectory.norm, *trajectory.energies(params),
        fingerprint=fingerprint or {}, diagnostics={**trajectory.diagnostics, "n_bar": n_bar},
    )
    for message in trajectory.warnings:
        series.flag(message)
    logger.info(f"TA run finished: n̄={n_bar:.4g}")
    return series
