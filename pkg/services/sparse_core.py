"""Hard thresholding, supports and estimation error."""
import numpy as np

from errors import DimensionMismatchError, InvalidArgumentError
from models import IndexSet


def top_k_indices(v: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest magnitudes; on equal magnitude the lower index wins."""
    # stable sort keeps ascending index order among equal keys
    order = np.argsort(-np.abs(v), kind="stable")
    return order[:k]


def hard_threshold(v, k: int) -> np.ndarray:
    """H_K: keep the K largest-magnitude entries of ``v`` and zero the rest.

    Args:
        v: real vector
        k: number of entries to keep, 1 <= k <= len(v)

    Returns:
        A new vector with at most ``k`` nonzeros.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise InvalidArgumentError(f"expected a 1-D vector, got shape {v.shape}")
    if not 1 <= k <= v.size:
        raise InvalidArgumentError(f"K={k} outside [1, {v.size}]")
    keep = top_k_indices(v, k)
    out = np.zeros_like(v)
    out[keep] = v[keep]
    return out


def support(v) -> IndexSet:
    v = np.asarray(v, dtype=np.float64)
    return IndexSet(indices=np.flatnonzero(v).tolist(), dimension=v.size)


def l2_error(v, w) -> float:
    """Euclidean distance between two vectors of equal length."""
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if v.shape != w.shape:
        raise DimensionMismatchError(f"length mismatch: {v.shape} vs {w.shape}")
    return float(np.linalg.norm(v - w))
