"""
Post-processing of observable series: cross-method comparison, Kronecker-delta
sampling, Monte Carlo error scaling and envelope diagnostics.
"""
from __future__ import annotations
import logging
from typing import Optional, Sequence, Tuple
import numpy as np
from src.models.series import ComparisonResult, ObservableSeries
from src.services.exceptions import GridMismatchError
from src.services.stochastic import draw_signs

logger = logging.getLogger(__name__)

AGREEMENT_THRESHOLD = 0.05


def compare_series(a: ObservableSeries, b: ObservableSeries, threshold: float = AGREEMENT_THRESHOLD,
                   label: str = "") -> ComparisonResult:
    """Sup-norm, rms and first divergence time of pz_a − pz_b on a shared grid."""
    if a.times.shape != b.times.shape:
        raise GridMismatchError(a.times.size, b.times.size)
    if not np.allclose(a.times, b.times, rtol=0.0, atol=1e-12):
        raise GridMismatchError(a.times.size, b.times.size, "time values differ")
    delta = np.abs(a.pz - b.pz)
    beyond = np.flatnonzero(delta > threshold)
    return ComparisonResult(
        label=label or f"{a.method.value} vs {b.method.value}",
        sup_norm=float(delta.max()),
        rms=float(np.sqrt(np.mean(delta ** 2))),
        first_divergence_time=float(a.times[beyond[0]]) if beyond.size else None,
    )


def kron_delta_demo(N: int, M: int, seed: int) -> np.ndarray:
    """(1/N) Σ_i s_n^i s_m^i from the same sign streams the stochastic ensemble uses."""
    if N < 1 or M < 1:
        raise ValueError(f"N and M must be at least 1, got N={N}, M={M}")
    signs = np.stack([draw_signs(M, seed, i) for i in range(N)])
    return (signs.T @ signs) / N


def offdiagonal_std(matrix: np.ndarray) -> float:
    mask = ~np.eye(matrix.shape[0], dtype=bool)
    return float(np.std(matrix[mask]))


def standard_error(samples: np.ndarray) -> np.ndarray:
    """Standard error of the mean along the first axis; undefined (NaN) for a single sample."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] < 2:
        return np.full(samples.shape[1:], np.nan)
    return samples.std(axis=0, ddof=1) / np.sqrt(samples.shape[0])


def standard_error_scaling(components: np.ndarray, sizes: Sequence[int], t_index: int) -> float:
    """
    Log-log slope of the standard error against ensemble size.
    For each size the members are split into disjoint batches and the batch
    standard errors are averaged; expected slope is −1/2.
    """
    values = np.asarray(components, dtype=float)[:, t_index]
    errors = []
    for size in sizes:
        batches = values.size // size
        if size < 2 or batches < 1:
            raise ValueError(f"cannot form a batch of {size} from {values.size} members")
        grouped = values[: batches * size].reshape(batches, size)
        errors.append(float(np.mean(grouped.std(axis=1, ddof=1) / np.sqrt(size))))
    slope = np.polyfit(np.log(np.asarray(sizes, dtype=float)), np.log(errors), 1)[0]
    logger.debug(f"Standard errors {errors} for sizes {list(sizes)}: slope {slope:.3f}")
    return float(slope)


def envelope(series: ObservableSeries, window: float) -> Tuple[np.ndarray, np.ndarray]:
    """Max |P_z| over consecutive windows of the given duration: (centres, values)."""
    if window <= 0:
        raise ValueError("window must be positive")
    t = series.times
    count = max(1, int(np.ceil((t[-1] - t[0]) / window - 1e-9)))
    edges = t[0] + window * np.arange(count + 1)
    centres, values = [], []
    for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        # last window is closed so the final sample is kept
        inside = (t >= lo) & ((t < hi) if i < count - 1 else (t <= t[-1]))
        if inside.any():
            centres.append(0.5 * (lo + hi))
            values.append(float(np.abs(series.pz[inside]).max()))
    return np.asarray(centres), np.asarray(values)


def envelope_decay(series: ObservableSeries, window: float) -> float:
    _, values = envelope(series, window)
    return float(values[0] - values[-1])


def beat_time(series: ObservableSeries, window: float, min_rise: float = 0.05) -> Optional[float]:
    """Centre of the envelope minimum reached before the first rise by more than min_rise."""
    centres, values = envelope(series, window)
    low = 0
    for i in range(1, values.size):
        if values[i] < values[low]:
            low = i
        elif values[i] > values[low] + min_rise:
            return float(centres[low])
    return None
