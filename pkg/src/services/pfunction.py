"""
Glauber-Sudarshan P-function sampling of the thermal oscillator.

The thermal density operator is an isotropic Gaussian mixture of coherent
states |α⟩ with ⟨|α|²⟩ = n̄. Each sample starts a zero-temperature D1
trajectory with f(0) = α and the ensemble is averaged with equal weights.
"""
from __future__ import annotations
import logging, math
from typing import Any, Dict, List, Optional, Tuple
import numpy as np
from src.config.enums import Method
from src.core.runner import EnsembleRunner, run_ordered
from src.core.special import mean_occupation
from src.models.domain import IntegratorConfig, ModelParams, PSample
from src.models.series import ObservableSeries
from src.services.davydov import DavydovTrajectory, default_initial, propagate_d1

logger = logging.getLogger(__name__)

PFUNCTION_STREAM = 1


def sample_pfunction(beta: float, params: ModelParams, N_s: int, seed: int) -> List[PSample]:
    """N_s coherent amplitudes with Re α, Im α ~ N(0, n̄/2), one substream per sample."""
    if N_s < 1:
        raise ValueError(f"N_s must be at least 1, got {N_s}")
    sigma = math.sqrt(0.5 * mean_occupation(beta, params))
    samples = []
    for i in range(N_s):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(PFUNCTION_STREAM, i)))
        x, p = rng.normal(0.0, sigma, size=2)
        samples.append(PSample(alpha=complex(x, p), index=i))
    return samples


def propagate_sample(sample: PSample, params: ModelParams, integrator_config: IntegratorConfig,
                     t_grid: np.ndarray) -> DavydovTrajectory:
    initial = default_initial(params, integrator_config, f0=sample.alpha)
    return propagate_d1(initial, params, integrator_config, t_grid, label=f"sample {sample.index}")


async def run_pfunction_ensemble(N_s: int, seed: int, beta: float, params: ModelParams,
                                 integrator_config: IntegratorConfig, t_grid: np.ndarray,
                                 runner: Optional[EnsembleRunner] = None,
                                 fingerprint: Optional[Dict[str, Any]] = None) -> ObservableSeries:
    """Equal-weight mean of P_z over N_s coherent-state initial conditions."""
    samples = sample_pfunction(beta, params, N_s, seed)

    def member(sample: PSample) -> Tuple[DavydovTrajectory, Tuple[np.ndarray, ...]]:
        trajectory = propagate_sample(sample, params, integrator_config, t_grid)
        return trajectory, trajectory.energies(params)

    logger.info(f"P-function ensemble: N_s={N_s}, n̄={mean_occupation(beta, params):.4g}")
    results = await run_ordered(member, samples, runner, label="sample")
    trajectories = [r[0] for r in results]
    energies = [np.stack(parts) for parts in zip(*(r[1] for r in results))]
    alphas = np.array([s.alpha for s in samples])
    series = ObservableSeries.from_members(
        Method.PFUNCTION, np.asarray(t_grid, dtype=float),
        np.stack([tr.pz for tr in trajectories]), np.stack([tr.norm for tr in trajectories]),
        *energies, fingerprint=fingerprint or {},
        diagnostics={"mean_abs_alpha_sq": float(np.mean(np.abs(alphas) ** 2)),
                     "max_norm_drift": max(tr.diagnostics["norm_drift"] for tr in trajectories)},
    )
    for trajectory in trajectories:
        for message in trajectory.warnings:
            series.flag(message)
    return series
