"""
Adaptive Runge-Kutta 5(4) integration of small complex ODE systems.

Complex state vectors are integrated as stacked real and imaginary parts,
so the error control acts on each real component separately.
"""
import logging
from typing import Any, Callable, Dict
import numpy as np
from scipy.integrate import RK45
from src.models.domain import IntegratorConfig
from src.services.exceptions import NonFiniteDerivativeError, StepSizeUnderflowError

logger = logging.getLogger(__name__)

ComplexRHS = Callable[[float, np.ndarray], np.ndarray]


class Integrator:
    """One instance per trajectory; holds the step statistics of its last run."""

    def __init__(self, config: IntegratorConfig):
        self.config = config
        self.stats: Dict[str, Any] = dict(steps=0, nfev=0, t_final=None)

    def integrate(self, rhs: ComplexRHS, y0: np.ndarray, t_grid: np.ndarray) -> np.ndarray:
        """Return the solution sampled at every point of t_grid, shape (len(t_grid), len(y0))."""
        t = np.asarray(t_grid, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise ValueError("t_grid must be a non-empty one-dimensional array")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("t_grid must be strictly ascending")
        y0 = np.asarray(y0, dtype=complex).ravel()
        n = y0.size

        if not np.all(np.isfinite(rhs(float(t[0]), y0))):
            raise NonFiniteDerivativeError(float(t[0]), y0)

        out = np.empty((t.size, n), dtype=complex)
        out[0] = y0
        self.stats = dict(steps=0, nfev=0, t_final=float(t[0]))
        if t.size == 1:
            return out

        def real_rhs(tt: float, u: np.ndarray) -> np.ndarray:
            y = u[:n] + 1j * u[n:]
            dy = np.asarray(rhs(tt, y), dtype=complex)
            if not np.all(np.isfinite(dy)):
                raise NonFiniteDerivativeError(tt, y)
            return np.concatenate([dy.real, dy.imag])

        solver = RK45(
            real_rhs, float(t[0]), np.concatenate([y0.real, y0.imag]), float(t[-1]),
            rtol=self.config.rel_tol, atol=self.config.abs_tol, max_step=self.config.max_step,
        )
        idx = 1
        while idx < t.size:
            solver.step()
            self.stats["steps"] += 1
            if solver.status == "failed":
                state = solver.y[:n] + 1j * solver.y[n:]
                logger.warning(f"Integration failed at t={solver.t:.6g}: step size underflow")
                raise StepSizeUnderflowError(float(solver.t), state)
            dense = solver.dense_output()
            while idx < t.size and t[idx] <= solver.t:
                u = solver.y if t[idx] == solver.t else dense(t[idx])
                out[idx] = u[:n] + 1j * u[n:]
                idx += 1

        self.stats.update(nfev=solver.nfev, t_final=float(solver.t))
        logger.debug(f"Integrated to t={solver.t:.6g} in {self.stats['steps']} steps ({solver.nfev} evaluations)")
        return out
