"""
Top-k sparsification with per-worker error feedback

Vectors are 1-D numpy arrays. float64 arrays use an O(d) partial selection;
object arrays (exact ``Fraction`` arithmetic) fall back to a sorted selection
with the same tie rule, so exact-mode runs produce the same masks.
"""
import logging
import math
from fractions import Fraction
from numbers import Real
from typing import Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

Ratio = Union[float, Fraction]


class CompressionError(ValueError):
    """Invalid input to the compressor"""


def kept_count(delta: Ratio, d: int) -> int:
    """Number of coordinates Top-k keeps: k = ceil(δ·d), clipped to [1, d]"""
    validate_ratio(delta)
    if d < 1:
        raise CompressionError(f"Dimension must be >= 1, got {d}")
    if isinstance(delta, Fraction):
        k = math.ceil(delta * d)
    else:
        # Guard against 0.25 * 4 = 1.0000000000000002 style rounding
        k = math.ceil(round(delta * d, 9))
    return min(max(k, 1), d)


def validate_ratio(delta: Ratio) -> None:
    """Check 0 < δ <= 1"""
    if not isinstance(delta, Real) or not (0 < delta <= 1):
        raise CompressionError(f"Compression ratio must be in (0, 1], got {delta}")


def _check_finite(v: np.ndarray) -> None:
    if v.ndim != 1:
        raise CompressionError(f"Expected a 1-D vector, got shape {v.shape}")
    if v.dtype == object:
        return
    if not np.all(np.isfinite(v)):
        raise CompressionError("Vector contains NaN or Inf entries")


def top_k_indices(v: np.ndarray, delta: Ratio) -> np.ndarray:
    """Ascending indices of the k largest-magnitude entries, lowest index wins ties"""
    _check_finite(v)
    d = v.shape[0]
    k = kept_count(delta, d)
    if k == d:
        return np.arange(d)

    magnitude = np.abs(v)
    if v.dtype == object:
        threshold = sorted(magnitude, reverse=True)[k - 1]
    else:
        threshold = np.partition(magnitude, d - k)[d - k]

    above = np.flatnonzero(magnitude > threshold)
    at_threshold = np.flatnonzero(magnitude == threshold)
    chosen = np.concatenate([above, at_threshold[: k - above.size]])
    chosen.sort()
    return chosen


def top_k(v: np.ndarray, delta: Ratio) -> np.ndarray:
    """Keep the ceil(δ·d) largest-magnitude coordinates of v, zero the rest"""
    indices = top_k_indices(v, delta)
    if v.dtype == object:
        # int 0 would turn later divisions into floats
        out = np.full(v.shape[0], Fraction(0), dtype=object)
    else:
        out = np.zeros_like(v)
    out[indices] = v[indices]
    return out


class ErrorState:
    """Per-worker error-feedback residual e^i, single-writer"""

    def __init__(self, residual: np.ndarray):
        self.residual = residual

    @classmethod
    def zeros(cls, d: int, exact: bool = False) -> "ErrorState":
        if exact:
            return cls(np.array([Fraction(0)] * d, dtype=object))
        return cls(np.zeros(d, dtype=np.float64))

    @property
    def dim(self) -> int:
        return int(self.residual.shape[0])

    def copy(self) -> "ErrorState":
        return ErrorState(self.residual.copy())

    def __repr__(self) -> str:
        return f"ErrorState(dim={self.dim})"


def ef_compress(
    g: np.ndarray,
    e: ErrorState,
    delta: Ratio,
) -> Tuple[np.ndarray, ErrorState]:
    """
    Error-feedback compression step

    Args:
        g: fresh gradient
        e: residual carried by the worker
        delta: compression ratio active at send time

    Returns:
        (update, e_next) with update = top_k(g + e, δ) and
        e_next = g + e - update
    """
    if g.shape != e.residual.shape:
        raise CompressionError(
            f"Dimension mismatch: gradient {g.shape} vs residual {e.residual.shape}"
        )
    corrected = g + e.residual
    update = top_k(corrected, delta)
    return update, ErrorState(corrected - update)
