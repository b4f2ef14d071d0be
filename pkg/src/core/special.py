"""
Special-function kernel shared by all propagation methods:
thermal weights of the oscillator, associated Laguerre polynomials
and matrix elements of normal-ordered displacement operators.
"""
import logging, math
from functools import lru_cache
from typing import Tuple, Union
import numpy as np
from scipy.special import gammaln
from src.models.domain import ModelParams
from src.services.exceptions import PrecisionLossError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# exp() underflows to zero below this exponent
_LOG_TINY = math.log(np.finfo(float).tiny)


def partition_function(beta: float, params: ModelParams) -> float:
    """Q(β) = (1 − e^{−βħω})^{−1}, energies E_n = nħω."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    return -1.0 / math.expm1(-beta * params.hw)


def boltzmann_weight(n: int, beta: float, params: ModelParams) -> float:
    """ρ_n = e^{−βnħω}/Q(β)."""
    if n < 0:
        raise ValueError(f"level index must be non-negative, got {n}")
    return math.exp(-beta * n * params.hw) / partition_function(beta, params)


def boltzmann_weights(n_max: int, beta: float, params: ModelParams, normalize: bool = True) -> Tuple[np.ndarray, float]:
    """
    Weights of levels 0..n_max and the dropped tail weight Σ_{n>n_max} ρ_n.
    With normalize=True the weights are divided by the truncated sum so they add to one.
    """
    levels = np.arange(n_max + 1)
    weights = np.exp(-beta * params.hw * levels) / partition_function(beta, params)
    tail = math.exp(-beta * params.hw * (n_max + 1))
    if normalize:
        weights = weights / weights.sum()
    return weights, tail


def mean_occupation(beta: float, params: ModelParams) -> float:
    """n̄ = 1/(e^{βħω} − 1), written to stay finite for large β."""
    q = math.exp(-beta * params.hw)
    return q / (1.0 - q)


def laguerre_assoc(n: int, k: int, x: ArrayLike) -> ArrayLike:
    """L_n^k(x) by the three-term upward recurrence; x may be an array."""
    if n < 0 or k < 0:
        raise ValueError(f"Laguerre degree and order must be non-negative, got n={n}, k={k}")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return float(prev) if prev.ndim == 0 else prev
    cur = 1.0 + k - x
    for m in range(1, n):
        prev, cur = cur, ((2 * m + 1 + k - x) * cur - (m + k) * prev) / (m + 1)
    return float(cur) if cur.ndim == 0 else cur


def laguerre_slope(n: int, x: ArrayLike) -> ArrayLike:
    """dL_n/dx = −L_{n−1}^1(x), zero for n = 0."""
    if n == 0:
        return 0.0 * np.asarray(x, dtype=float) if np.ndim(x) else 0.0
    return -laguerre_assoc(n - 1, 1, x)


def laguerre_table(dim: int, x: float) -> np.ndarray:
    """Table T[m, k] = L_m^k(x) for 0 ≤ m, k < dim (entries with m + k ≥ dim are unused)."""
    k = np.arange(dim, dtype=float)
    table = np.empty((dim, dim))
    table[0] = 1.0
    if dim > 1:
        table[1] = 1.0 + k - x
    for m in range(1, dim - 1):
        table[m + 1] = ((2 * m + 1 + k - x) * table[m] - (m + k) * table[m - 1]) / (m + 1)
    return table


@lru_cache(maxsize=64)
def _index_tables(dim: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """√(min!/max!), min(m,n), |m−n| and the m ≤ n mask for a dim×dim matrix."""
    if 0.5 * gammaln(dim) > -_LOG_TINY:
        raise PrecisionLossError(dim, "factorial ratio √(m!/n!) underflows to zero")
    m, n = np.indices((dim, dim))
    lo, hi = np.minimum(m, n), np.maximum(m, n)
    ratio = np.exp(0.5 * (gammaln(lo + 1) - gammaln(hi + 1)))
    upper = m <= n
    for arr in (ratio, lo, hi, upper):
        arr.setflags(write=False)
    return ratio, lo, hi - lo, upper


def displacement_overlap_matrix(z: complex, dim: int) -> np.ndarray:
    """
    M_mn(z) = ⟨m| e^{z a†} e^{−z* a} |n⟩ in closed Laguerre form:
    (−z*)^{n−m} √(m!/n!) L_m^{n−m}(|z|²) for m ≤ n and z^{m−n} √(n!/m!) L_n^{m−n}(|z|²) otherwise.
    The displacement operator is D(z) = e^{−|z|²/2} M(z).
    """
    if dim < 1:
        raise ValueError(f"dim must be at least 1, got {dim}")
    ratio, lo, diff, upper = _index_tables(dim)
    z = complex(z)
    lag = laguerre_table(dim, abs(z) ** 2)[lo, diff]
    up = np.ones(dim, dtype=complex)
    down = np.ones(dim, dtype=complex)
    if dim > 1:
        up[1:] = np.cumprod(np.full(dim - 1, -z.conjugate()))
        down[1:] = np.cumprod(np.full(dim - 1, z))
    phase = np.where(upper, up[diff], down[diff])
    matrix = phase * ratio * lag
    if not np.all(np.isfinite(matrix)):
        raise PrecisionLossError(dim, f"non-finite overlap element for |z|={abs(z):.3g}")
    return matrix
