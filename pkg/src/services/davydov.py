"""
Davydov D1 equations of motion and trajectory propagation.

The right-hand side is written once for an oscillator overlap weight w(y),
its derivative w'(y) at y = |g−f|² and an occupation ν. The zero-temperature
D1 equations use (1, 0, 0); Boltzmann level n uses (L_n, L_n', n); the
thermally averaged equations use (e^{−n̄y}, −n̄e^{−n̄y}, n̄).
"""
from __future__ import annotations
import cmath, logging, math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple
import numpy as np
from src.config.enums import IntegrationMode, Method
from src.core.integrator import Integrator
from src.core.special import laguerre_assoc, laguerre_slope
from src.models.domain import D1State, IntegratorConfig, ModelParams
from src.models.series import ObservableSeries

logger = logging.getLogger(__name__)

NORM_DRIFT_LIMIT = 1e-6
SINGULAR_PROXIMITY = 1e-6


@dataclass(frozen=True)
class OverlapKernel:
    """Weight of the branch overlap ⟨Ψ_+|Ψ_-⟩ and the oscillator occupation."""
    occupation: float = 0.0
    level: Optional[int] = None
    n_bar: Optional[float] = None

    @classmethod
    def d1(cls) -> "OverlapKernel":
        return cls()

    @classmethod
    def laguerre(cls, n: int) -> "OverlapKernel":
        return cls(occupation=float(n), level=n)

    @classmethod
    def thermal(cls, n_bar: float) -> "OverlapKernel":
        return cls(occupation=n_bar, n_bar=n_bar)

    def evaluate(self, y: Any) -> Tuple[Any, Any]:
        """(w(y), w'(y))"""
        if self.level is not None:
            return laguerre_assoc(self.level, 0, y), laguerre_slope(self.level, y)
        if self.n_bar is not None:
            decay = np.exp(-self.n_bar * np.asarray(y, dtype=float))
            if decay.ndim == 0:
                decay = float(decay)
            return decay, -self.n_bar * decay
        return 1.0, 0.0


D1_KERNEL = OverlapKernel.d1()


def regularized_inverse(z: complex, floor: float) -> complex:
    """1/z as z*|z|²/(|z|⁴ + floor²); exactly 0 at z = 0."""
    a2 = z.real * z.real + z.imag * z.imag
    if floor == 0.0:
        return 1.0 / z if a2 > 0.0 else 0j
    return z.conjugate() * a2 / (a2 * a2 + floor * floor)


def kernel_rhs(y: np.ndarray, params: ModelParams, mode: IntegrationMode,
               kernel: OverlapKernel = D1_KERNEL, floor: float = 1e-12) -> np.ndarray:
    """Explicit time derivatives of (A, B, f, g)."""
    A, B, f, g = complex(y[0]), complex(y[1]), complex(y[2]), complex(y[3])
    hbar, omega, lam, V, eps = params.hbar, params.omega, params.lam, params.V, params.epsilon
    hw = hbar * omega
    fc, gc = f.conjugate(), g.conjugate()
    f2, g2 = abs(f) ** 2, abs(g) ** 2
    S = math.exp(-0.5 * (f2 + g2))
    efg = cmath.exp(fc * g)
    egf = efg.conjugate()
    w, dw = kernel.evaluate(abs(g - f) ** 2)
    overlap = S * efg * w

    if mode is IntegrationMode.SIMPLIFIED:
        fd = -1j * omega * f - 0.5j * lam / hbar
        gd = -1j * omega * g + 0.5j * lam / hbar
    else:
        iA, iB = regularized_inverse(A, floor), regularized_inverse(B, floor)
        back_f = V * S * (g - f) * (B * iA * efg * (w - dw) - B.conjugate() * iA.conjugate() * egf * dw)
        back_g = V * S * (f - g) * (A * iB * egf * (w - dw) - A.conjugate() * iB.conjugate() * efg * dw)
        fd = -1j / hbar * (hw * f + 0.5 * lam + back_f)
        gd = -1j / hbar * (hw * g - 0.5 * lam + back_g)

    kf = fd * fc - f * fd.conjugate()
    kg = gd * gc - g * gd.conjugate()
    nu = kernel.occupation
    Ad = -0.5 * A * kf - 1j / hbar * (V * B * overlap + hw * A * (f2 + nu) + lam * A * f.real + 0.5 * eps * A)
    Bd = -0.5 * B * kg - 1j / hbar * (V * A * overlap.conjugate() + hw * B * (g2 + nu) - lam * B * g.real - 0.5 * eps * B)
    return np.array([Ad, Bd, fd, gd], dtype=complex)


def kernel_energies(states: np.ndarray, params: ModelParams,
                    kernel: OverlapKernel = D1_KERNEL) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(E_s, E_r, E_total) for states of shape (..., 4)."""
    A, B, f, g = (states[..., i] for i in range(4))
    a2, b2 = np.abs(A) ** 2, np.abs(B) ** 2
    S = np.exp(-0.5 * (np.abs(f) ** 2 + np.abs(g) ** 2))
    w, _ = kernel.evaluate(np.abs(g - f) ** 2)
    overlap = S * np.exp(np.conj(f) * g) * w
    e_spin = 2.0 * params.V * np.real(np.conj(A) * B * overlap)
    nu = kernel.occupation
    e_rest = (params.hw * (a2 * (np.abs(f) ** 2 + nu) + b2 * (np.abs(g) ** 2 + nu))
              + params.lam * (a2 * f.real - b2 * g.real))
    e_total = e_spin + e_rest + 0.5 * params.epsilon * (a2 - b2)
    return e_spin, e_rest, e_total


def singular_term(states: np.ndarray, params: ModelParams, kernel: OverlapKernel = D1_KERNEL,
                  floor: float = 1e-12) -> np.ndarray:
    """Magnitude of the V-dependent (singular) term of the explicit ḟ equation."""
    A, B, f, g = (states[..., i] for i in range(4))
    a2 = np.abs(A) ** 2
    if floor > 0:
        inv_a = np.conj(A) * a2 / (a2 * a2 + floor * floor)
    else:
        inv_a = np.where(a2 > 0, 1.0 / np.where(a2 > 0, A, 1.0), 0.0)
    S = np.exp(-0.5 * (np.abs(f) ** 2 + np.abs(g) ** 2))
    w, dw = kernel.evaluate(np.abs(g - f) ** 2)
    efg = np.exp(np.conj(f) * g)
    term = S * (g - f) * (B * inv_a * efg * (w - dw) - np.conj(B) * np.conj(inv_a) * np.conj(efg) * dw)
    return np.abs(params.V / params.hbar * term)


def d1_rhs(state: D1State, params: ModelParams, mode: IntegrationMode = IntegrationMode.FULL,
           floor: float = 1e-12) -> D1State:
    """Time derivatives of the zero-temperature D1 parameters, packaged as a D1State."""
    return D1State.from_vector(kernel_rhs(state.to_vector(), params, mode, D1_KERNEL, floor))


@dataclass
class DavydovTrajectory:
    """Sampled D1 parameters of one trajectory, shape (len(times), 4)."""
    times: np.ndarray
    states: np.ndarray
    kernel: OverlapKernel = D1_KERNEL
    label: str = ""
    warnings: List[str] = field(default_factory=list)
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def A(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def B(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def f(self) -> np.ndarray:
        return self.states[:, 2]

    @property
    def g(self) -> np.ndarray:
        return self.states[:, 3]

    @property
    def pz(self) -> np.ndarray:
        return np.abs(self.A) ** 2 - np.abs(self.B) ** 2

    @property
    def norm(self) -> np.ndarray:
        return np.abs(self.A) ** 2 + np.abs(self.B) ** 2

    def state(self, index: int) -> D1State:
        return D1State.from_vector(self.states[index])

    def energies(self, params: ModelParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return kernel_energies(self.states, params, self.kernel)


def check_trajectory(trajectory: DavydovTrajectory, mode: IntegrationMode) -> None:
    """Record norm drift and, in Full mode, the closest approach to A = 0 or B = 0."""
    drift = float(np.max(np.abs(trajectory.norm - 1.0)))
    trajectory.diagnostics["norm_drift"] = drift
    prefix = f"{trajectory.label}: " if trajectory.label else ""
    if drift > NORM_DRIFT_LIMIT:
        message = f"{prefix}norm drift {drift:.3e} exceeds {NORM_DRIFT_LIMIT:.0e}"
        logger.warning(message)
        trajectory.warnings.append(message)
    if mode is IntegrationMode.FULL and trajectory.times.size > 1:
        for name, amp in (("A", trajectory.A[1:]), ("B", trajectory.B[1:])):
            i = int(np.argmin(np.abs(amp)))
            closest, when = float(np.abs(amp[i])), float(trajectory.times[1:][i])
            trajectory.diagnostics[f"min_abs_{name}"] = (closest, when)
            if closest < SINGULAR_PROXIMITY:
                message = f"{prefix}|{name}| = {closest:.2e} at t={when:.6g} is near the singular set"
                logger.warning(message)
                trajectory.warnings.append(message)


def propagate_d1(initial: D1State, params: ModelParams, integrator_config: IntegratorConfig,
                 t_grid: np.ndarray, kernel: OverlapKernel = D1_KERNEL, label: str = "") -> DavydovTrajectory:
    """Integrate the D1 equations (or a Laguerre-weighted variant) from the given state."""
    if abs(initial.norm - 1.0) > 1e-12:
        raise ValueError(f"initial state must be normalized, |A|²+|B|² = {initial.norm}")
    mode, floor = integrator_config.mode, integrator_config.regularization_floor

    def rhs(_t: float, y: np.ndarray) -> np.ndarray:
        return kernel_rhs(y, params, mode, kernel, floor)

    integrator = Integrator(integrator_config)
    states = integrator.integrate(rhs, initial.to_vector(), t_grid)
    trajectory = DavydovTrajectory(times=np.asarray(t_grid, dtype=float), states=states, kernel=kernel, label=label)
    trajectory.diagnostics["integrator"] = dict(integrator.stats)
    check_trajectory(trajectory, mode)
    return trajectory


def default_initial(params: ModelParams, integrator_config: IntegratorConfig, f0: complex = 0j) -> D1State:
    """A=1, B=0 (or the δ-perturbed pair), f(0)=f0; g(0) shifted by λ/ħω in Simplified mode."""
    shift = params.lam / params.hw if integrator_config.mode.is_simplified else 0.0
    return D1State.initial(f0=f0, g0=f0 + shift, perturbation=integrator_config.initial_perturbation)


def run_d1(params: ModelParams, integrator_config: IntegratorConfig, t_grid: np.ndarray,
           fingerprint: Optional[Dict[str, Any]] = None) -> ObservableSeries:
    """Single zero-temperature D1 trajectory as an observable series."""
    trajectory = propagate_d1(default_initial(params, integrator_config), params, integrator_config, t_grid, label="d1")
    e_spin, e_rest, e_total = trajectory.energies(params)
    series = ObservableSeries.deterministic(
        Method.D1, trajectory.times, trajectory.pz, trajectory.norm, e_spin, e_rest, e_total,
        fingerprint=fingerprint or {}, diagnostics=dict(trajectory.diagnostics),
    )
    for message in trajectory.warnings:
        series.flag(message)
    logger.info(f"D1 run finished: {trajectory.times.size} samples, norm drift {trajectory.diagnostics['norm_drift']:.2e}")
    return series
