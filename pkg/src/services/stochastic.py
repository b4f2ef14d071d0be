"""
Stochastic thermal Davydov method.

Each realization replaces the oscillator vacuum of the D1 ansatz by a
random-sign superposition |Φ⟩ = Σ_n s_n e^{−βE_n/2}/√Q_M |n⟩, truncated at
M levels and renormalized. Ensemble averages over the signs reproduce the
canonical density matrix.
"""
from __future__ import annotations
import cmath, logging, math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple
import numpy as np
from scipy.linalg import expm
from src.config.enums import IntegrationMode, Method
from src.core.integrator import Integrator
from src.core.runner import EnsembleRunner, run_ordered
from src.core.special import displacement_overlap_matrix
from src.models.domain import (D1State, IntegratorConfig, ModelParams, SignRealization,
                               ThermalConfig, ThermalQuantities)
from src.models.series import ObservableSeries
from src.services.davydov import DavydovTrajectory, check_trajectory, default_initial, regularized_inverse

logger = logging.getLogger(__name__)

SIGN_STREAM = 0
PHI_TAIL_LIMIT = 1e-3


def sign_generator(seed: int, index: int, stream: int = SIGN_STREAM) -> np.random.Generator:
    """Independent generator per (seed, realization index)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, index)))


def draw_signs(M: int, seed: int, index: int = 0) -> np.ndarray:
    return 1 - 2 * sign_generator(seed, index).integers(0, 2, size=M)


def realization_from_signs(signs: Any, beta: float, params: ModelParams, seed: int = 0, index: int = 0) -> SignRealization:
    """Build v_0 = Φ coefficients and v_1 = â·Φ coefficients for a given sign pattern."""
    signs = [int(s) for s in signs]
    M = len(signs)
    levels = np.arange(M)
    amplitude = np.exp(-0.5 * beta * params.hw * levels)
    v0 = np.asarray(signs, dtype=float) * amplitude / math.sqrt(float(amplitude @ amplitude))
    v1 = np.zeros(M)
    v1[:-1] = v0[1:] * np.sqrt(levels[1:])
    for arr in (v0, v1):
        arr.setflags(write=False)
    tail = math.exp(-beta * params.hw * M)
    return SignRealization(signs=signs, seed=seed, index=index, v0=v0, v1=v1, tail=tail)


def sample_signs(M: int, seed: int, beta: float, params: ModelParams, index: int = 0) -> SignRealization:
    """Realization `index` of the random signs s_n ∈ {+1, −1}, n < M."""
    if M < 1:
        raise ValueError(f"M must be at least 1, got {M}")
    return realization_from_signs(draw_signs(M, seed, index), beta, params, seed, index)


def thermal_quantities(real: SignRealization) -> ThermalQuantities:
    """T_0^1 = v0·v1, T_1^1 = v1·v1 and U_1^1 = T_1^1 + ⟨Φ|Φ⟩."""
    norm = float(real.v0 @ real.v0)
    T11 = float(real.v1 @ real.v1)
    return ThermalQuantities(T00=norm, T01=float(real.v0 @ real.v1), T11=T11, U11=T11 + norm)


def _prefactor(f: complex, g: complex) -> complex:
    return math.exp(-0.5 * (abs(f) ** 2 + abs(g) ** 2)) * cmath.exp(f.conjugate() * g)


def stochastic_overlap(f: complex, g: complex, real: SignRealization) -> complex:
    """⟨Φ|D†_f D_g|Φ⟩ = e^{−(|f|²+|g|²)/2} e^{f*g} v0·M(g−f)·v0."""
    f, g = complex(f), complex(g)
    matrix = displacement_overlap_matrix(g - f, real.M)
    return _prefactor(f, g) * complex(real.v0 @ matrix @ real.v0)


def stochastic_overlap_annihilate(f: complex, g: complex, real: SignRealization) -> complex:
    """⟨Φ|D†_f D_g â|Φ⟩ = e^{−(|f|²+|g|²)/2} e^{f*g} v0·M(g−f)·v1, since â|Φ⟩ has coefficients v1."""
    f, g = complex(f), complex(g)
    matrix = displacement_overlap_matrix(g - f, real.M)
    return _prefactor(f, g) * complex(real.v0 @ matrix @ real.v1)


def overlap_oracle_residual(f: complex, g: complex, real: SignRealization, extra_levels: int = 40) -> Tuple[float, float]:
    """
    Residuals of both closed-form overlaps against dense truncated-Fock matrices
    D_f = expm(f a† − f* a) of dimension M + extra_levels.
    """
    dim = real.M + extra_levels
    a = np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)
    phi = np.zeros(dim, dtype=complex)
    phi[:real.M] = real.v0
    d_f = expm(f * a.conj().T - np.conj(f) * a)
    d_g = expm(g * a.conj().T - np.conj(g) * a)
    left = d_f @ phi
    dense = np.vdot(left, d_g @ phi)
    dense_a = np.vdot(left, d_g @ (a @ phi))
    return (abs(dense - stochastic_overlap(f, g, real)),
            abs(dense_a - stochastic_overlap_annihilate(f, g, real)))


@dataclass(frozen=True)
class _RealizationTerms:
    """Time-independent vectors of one realization, including parity-flipped copies."""
    v0: np.ndarray
    v1: np.ndarray
    pv0: np.ndarray
    pv1: np.ndarray
    T01: float
    T11: float

    @classmethod
    def build(cls, real: SignRealization, quantities: Optional[ThermalQuantities] = None) -> "_RealizationTerms":
        quantities = quantities or thermal_quantities(real)
        parity = (-1.0) ** np.arange(real.M)
        return cls(real.v0, real.v1, parity * real.v0, parity * real.v1, quantities.T01, quantities.T11)

    def overlaps(self, f: complex, g: complex) -> Tuple[complex, complex, complex, complex]:
        """O_fg, ⟨D†_f D_g â⟩, O_gf and ⟨D†_g D_f â⟩; M(f−g) = Π M(g−f) Π."""
        matrix = displacement_overlap_matrix(g - f, self.v0.size)
        S = math.exp(-0.5 * (abs(f) ** 2 + abs(g) ** 2))
        efg = cmath.exp(f.conjugate() * g)
        pref = S * efg
        overlap = pref * complex(self.v0 @ matrix @ self.v0)
        overlap_a = pref * complex(self.v0 @ matrix @ self.v1)
        overlap_a_gf = pref.conjugate() * complex(self.pv0 @ matrix @ self.pv1)
        return overlap, overlap_a, overlap.conjugate(), overlap_a_gf


def _vector_rhs(y: np.ndarray, terms: _RealizationTerms, params: ModelParams,
                mode: IntegrationMode, floor: float) -> np.ndarray:
    A, B, f, g = complex(y[0]), complex(y[1]), complex(y[2]), complex(y[3])
    hbar, omega, lam, V, eps = params.hbar, params.omega, params.lam, params.V, params.epsilon
    hw = hbar * omega
    T, T11 = terms.T01, terms.T11
    O, Oa, O_gf, Oa_gf = terms.overlaps(f, g)

    if mode is IntegrationMode.SIMPLIFIED:
        fd = -1j * omega * f - 0.5j * lam / hbar
        gd = -1j * omega * g + 0.5j * lam / hbar
    else:
        iA, iB = regularized_inverse(A, floor), regularized_inverse(B, floor)
        back_f = V * (B * iA * ((g - f - T) * O + Oa) + B.conjugate() * iA.conjugate() * (T * O_gf - Oa_gf))
        back_g = V * (A * iB * ((f - g - T) * O_gf + Oa_gf) + A.conjugate() * iB.conjugate() * (T * O - Oa))
        fd = -1j / hbar * (hw * (f + T) + 0.5 * lam + back_f)
        gd = -1j / hbar * (hw * (g + T) - 0.5 * lam + back_g)

    kf = fd * f.conjugate() - f * fd.conjugate() + 2.0 * (fd - fd.conjugate()) * T
    kg = gd * g.conjugate() - g * gd.conjugate() + 2.0 * (gd - gd.conjugate()) * T
    Ad = -0.5 * A * kf - 1j / hbar * (V * B * O + hw * A * (abs(f) ** 2 + 2.0 * f.real * T + T11)
                                      + lam * A * (f.real + T) + 0.5 * eps * A)
    Bd = -0.5 * B * kg - 1j / hbar * (V * A * O_gf + hw * B * (abs(g) ** 2 + 2.0 * g.real * T + T11)
                                      - lam * B * (g.real + T) - 0.5 * eps * B)
    return np.array([Ad, Bd, fd, gd], dtype=complex)


def stochastic_rhs(state: D1State, real: SignRealization, quantities: ThermalQuantities, params: ModelParams,
                   mode: IntegrationMode = IntegrationMode.FULL, floor: float = 1e-12) -> D1State:
    """Time derivatives of (A, B, f, g) for one sign realization."""
    terms = _RealizationTerms.build(real, quantities)
    return D1State.from_vector(_vector_rhs(state.to_vector(), terms, params, mode, floor))


def stochastic_energies(states: np.ndarray, real: SignRealization,
                        params: ModelParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(E_s, E_r, E_total) along a trajectory of one realization."""
    terms = _RealizationTerms.build(real)
    T, T11 = terms.T01, terms.T11
    A, B, f, g = (states[:, i] for i in range(4))
    overlap = np.array([terms.overlaps(complex(fi), complex(gi))[0] for fi, gi in zip(f, g)])
    a2, b2 = np.abs(A) ** 2, np.abs(B) ** 2
    e_spin = 2.0 * params.V * np.real(np.conj(A) * B * overlap)
    e_rest = (params.hw * (a2 * (np.abs(f) ** 2 + 2.0 * f.real * T + T11) + b2 * (np.abs(g) ** 2 + 2.0 * g.real * T + T11))
              + params.lam * (a2 * (f.real + T) - b2 * (g.real + T)))
    return e_spin, e_rest, e_spin + e_rest + 0.5 * params.epsilon * (a2 - b2)


def propagate_realization(real: SignRealization, params: ModelParams, integrator_config: IntegratorConfig,
                          t_grid: np.ndarray) -> DavydovTrajectory:
    terms = _RealizationTerms.build(real)
    mode, floor = integrator_config.mode, integrator_config.regularization_floor

    def rhs(_t: float, y: np.ndarray) -> np.ndarray:
        return _vector_rhs(y, terms, params, mode, floor)

    integrator = Integrator(integrator_config)
    initial = default_initial(params, integrator_config)
    states = integrator.integrate(rhs, initial.to_vector(), t_grid)
    trajectory = DavydovTrajectory(times=np.asarray(t_grid, dtype=float), states=states,
                                   label=f"realization {real.index}")
    trajectory.diagnostics["integrator"] = dict(integrator.stats)
    check_trajectory(trajectory, mode)
    return trajectory


async def run_stochastic_ensemble(N: int, seed: int, beta: float, params: ModelParams, thermal: ThermalConfig,
                                  integrator_config: IntegratorConfig, t_grid: np.ndarray,
                                  runner: Optional[EnsembleRunner] = None,
                                  fingerprint: Optional[Dict[str, Any]] = None) -> ObservableSeries:
    """Mean P_z over N sign realizations, with per-time standard error."""
    if N < 1:
        raise ValueError(f"N must be at least 1, got {N}")
    thermal = thermal.escalated(params)
    M = thermal.fock_trunc_M
    realizations = [sample_signs(M, seed, beta, params, index=i) for i in range(N)]
    tail = realizations[0].tail
    if tail > PHI_TAIL_LIMIT:
        logger.warning(f"Φ truncation at M={M} drops Boltzmann weight {tail:.2e}")

    def member(real: SignRealization) -> Tuple[DavydovTrajectory, Tuple[np.ndarray, ...]]:
        trajectory = propagate_realization(real, params, integrator_config, t_grid)
        return trajectory, stochastic_energies(trajectory.states, real, params)

    logger.info(f"Stochastic ensemble: N={N}, M={M}, mode={integrator_config.mode.value}")
    results = await run_ordered(member, realizations, runner, label="realization")
    trajectories: List[DavydovTrajectory] = [r[0] for r in results]
    energies = [np.stack(parts) for parts in zip(*(r[1] for r in results))]
    series = ObservableSeries.from_members(
        Method.STOCHASTIC, np.asarray(t_grid, dtype=float),
        np.stack([tr.pz for tr in trajectories]), np.stack([tr.norm for tr in trajectories]),
        *energies, fingerprint=fingerprint or {},
        diagnostics={"phi_tail": tail, "fock_trunc_M": M,
                     "max_norm_drift": max(tr.diagnostics["norm_drift"] for tr in trajectories)},
    )
    for trajectory in trajectories:
        for message in trajectory.warnings:
            series.flag(message)
    return series
