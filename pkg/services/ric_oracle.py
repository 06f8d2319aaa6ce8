"""Exact restricted isometry constants for small matrices.

delta_R(Phi) is the maximum over all R-column subsets S of the spectral norm
of Phi_S^T Phi_S - I. Eigenvalue interlacing puts the maximum over |S| <= R
at |S| = R, so only subsets of size exactly R are enumerated. Nothing here is
approximate: when the subset count exceeds the cap the oracle refuses.
"""
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from config import get_settings
from errors import DimensionMismatchError, EnumerationLimitError, InvalidArgumentError
from models import (
    ContractionCheck,
    IndexSet,
    PhaseSchedule,
    ProductBoundCheck,
    RapidDecayCertificate,
    RicResult,
    SparseSignal,
)
from services.measurements import make_phase
from services.recovery import iht_step, run_siht
from services.sparse_core import l2_error

JACOBI_TOLERANCE = 1e-12
JACOBI_MAX_SWEEPS = 100
SYMMETRY_TOLERANCE = 1e-12
INEQUALITY_SLACK = 1e-9
ZERO_ERROR = 1e-12

_CHUNK = 2048


def jacobi_eigenvalues(stack: np.ndarray, tol: float = JACOBI_TOLERANCE, max_sweeps: int = JACOBI_MAX_SWEEPS) -> np.ndarray:
    """Eigenvalues of a stack of symmetric matrices by cyclic Jacobi rotations.

    Args:
        stack: array of shape (B, n, n), every slice symmetric
        tol: stop once the off-diagonal Frobenius norm of every slice is below
            ``tol * max(1, ||A||_F)``
        max_sweeps: hard limit on full cyclic sweeps

    Returns:
        Array of shape (B, n), unsorted eigenvalues.
    """
    a = np.array(stack, dtype=np.float64)
    n = a.shape[-1]
    pairs = list(itertools.combinations(range(n), 2))
    scale = max(1.0, float(np.sqrt(np.sum(a * a, axis=(1, 2))).max(initial=0.0)))

    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        for sweep in range(max_sweeps + 1):
            diag = np.diagonal(a, axis1=1, axis2=2)
            off = np.sqrt(np.clip(np.sum(a * a, axis=(1, 2)) - np.sum(diag * diag, axis=1), 0.0, None))
            if off.max(initial=0.0) <= tol * scale:
                break
            if sweep == max_sweeps:
                logger.warning(f"Jacobi did not converge in {max_sweeps} sweeps (off-norm {off.max():.3e})")
                break

            for p, q in pairs:
                apq = a[:, p, q]
                rotate = apq != 0
                if not rotate.any():
                    continue
                theta = (a[:, q, q] - a[:, p, p]) / (2 * np.where(rotate, apq, 1.0))
                t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(theta * theta + 1))
                t = np.where(rotate & np.isfinite(t), t, 0.0)
                c = (1 / np.sqrt(t * t + 1))[:, None]
                s = t[:, None] * c

                col_p = a[:, :, p].copy()
                col_q = a[:, :, q].copy()
                a[:, :, p] = c * col_p - s * col_q
                a[:, :, q] = s * col_p + c * col_q
                row_p = a[:, p, :].copy()
                row_q = a[:, q, :].copy()
                a[:, p, :] = c * row_p - s * row_q
                a[:, q, :] = s * row_p + c * row_q
                a[rotate, p, q] = 0.0
                a[rotate, q, p] = 0.0

    return np.diagonal(a, axis1=1, axis2=2).copy()


def operator_norm_sym(g) -> float:
    """Spectral norm (largest absolute eigenvalue) of a symmetric matrix."""
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {g.shape}")
    if not np.allclose(g, g.T, rtol=0.0, atol=SYMMETRY_TOLERANCE):
        raise InvalidArgumentError("matrix is not symmetric")
    return float(np.abs(jacobi_eigenvalues(g[None])[0]).max())


def _best_in_range(gram: np.ndarray, order: int, start: int, stop: int) -> Tuple[float, int, Tuple[int, ...]]:
    """Largest Gram deviation among subsets ranked [start, stop) in lexicographic order."""
    n = gram.shape[0]
    eye = np.eye(order)
    best = (-1.0, -1, ())
    subsets = itertools.islice(itertools.combinations(range(n), order), start, stop)
    rank = start
    while True:
        chunk = list(itertools.islice(subsets, _CHUNK))
        if not chunk:
            break
        idx = np.array(chunk, dtype=np.intp)
        deviations = gram[idx[:, :, None], idx[:, None, :]] - eye
        norms = np.abs(jacobi_eigenvalues(deviations)).max(axis=1)
        pos = int(np.argmax(norms))
        if norms[pos] > best[0]:
            best = (float(norms[pos]), rank + pos, chunk[pos])
        rank += len(chunk)
    return best


def ric(phi, order: int, cap: Optional[int] = None, workers: int = 1) -> RicResult:
    """delta_R(Phi) by exhaustive enumeration of the R-column subsets.

    Ties between subsets go to the lexicographically first one, so the
    witness does not depend on ``workers``.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if phi.ndim != 2:
        raise InvalidArgumentError(f"expected a matrix, got shape {phi.shape}")
    n = phi.shape[1]
    if not 1 <= order <= n:
        raise InvalidArgumentError(f"order R={order} outside [1, {n}]")
    cap = get_settings().ric_subset_cap if cap is None else cap
    total = math.comb(n, order)
    if total > cap:
        raise EnumerationLimitError(total, cap)

    gram = phi.T @ phi
    if workers <= 1 or total <= _CHUNK:
        value, _, witness = _best_in_range(gram, order, 0, total)
    else:
        edges = np.linspace(0, total, workers + 1).astype(int).tolist()
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(
                executor.map(
                    _best_in_range,
                    [gram] * workers,
                    [order] * workers,
                    edges[:-1],
                    edges[1:],
                )
            )
        # max value, then lowest rank
        value, _, witness = max(results, key=lambda r: (r[0], -r[1]))

    logger.debug(f"delta_{order} = {value:.6f} over {total} subsets")
    return RicResult(order=order, value=value, witness=IndexSet(indices=witness, dimension=n))


def _check_order(k: int, n: int) -> None:
    if 3 * k > n:
        raise InvalidArgumentError(f"3K={3 * k} exceeds N={n}")


def verify_contraction(
    phi,
    truth: SparseSignal,
    x_prev: SparseSignal,
    k: int,
    delta: Optional[float] = None,
) -> ContractionCheck:
    """Check ||x^t - x|| <= sqrt(3) delta_3K ||x^{t-1} - x|| for one IHT step.

    ``delta`` may carry a precomputed delta_3K(Phi) to skip the enumeration.
    """
    phi = np.asarray(phi, dtype=np.float64)
    _check_order(k, phi.shape[1])
    if np.count_nonzero(x_prev.values) > k:
        raise InvalidArgumentError(f"x_prev has more than K={k} nonzeros")
    if delta is None:
        delta = ric(phi, 3 * k).value

    x_next = iht_step(x_prev, make_phase(phi, truth), k)
    before = l2_error(x_prev.values, truth.values)
    after = l2_error(x_next.values, truth.values)
    bound = math.sqrt(3) * delta
    if before < ZERO_ERROR:
        return ContractionCheck(ratio=0.0, bound=bound, delta=delta, holds=True)
    ratio = after / before
    return ContractionCheck(ratio=ratio, bound=bound, delta=delta, holds=ratio <= bound + INEQUALITY_SLACK)


def _check_phase_count(matrices: Sequence[np.ndarray], schedule: PhaseSchedule) -> None:
    if len(matrices) != schedule.phase_count:
        raise DimensionMismatchError(f"got {len(matrices)} matrices for {schedule.phase_count} phases")


def _phase_deltas(matrices: Sequence[np.ndarray], schedule: PhaseSchedule, k: int) -> list:
    _check_phase_count(matrices, schedule)
    return [ric(phi, 3 * k).value for phi in matrices]


def product_contraction_bound(
    matrices: Sequence[np.ndarray],
    schedule: PhaseSchedule,
    k: int,
    truth: SparseSignal,
    x0: Optional[SparseSignal] = None,
) -> ProductBoundCheck:
    """Compare ||x^{t_i} - x|| with 3^{t_i/2} prod_j delta_3K(Phi_j)^{tau_j} ||x^0 - x|| at every boundary."""
    _check_order(k, truth.dimension)
    deltas = _phase_deltas(matrices, schedule, k)
    trace = run_siht(schedule, (make_phase(np.asarray(phi), truth) for phi in matrices), k, x0=x0, truth=truth)

    with np.errstate(divide="ignore", over="ignore"):
        log_initial = np.log(trace.errors[0])
        log_deltas = np.cumsum(np.array(schedule.durations) * np.log(deltas))
        boundaries = schedule.boundaries[1:]
        log_rhs = 0.5 * np.array(boundaries) * math.log(3) + log_deltas + log_initial
        rhs = np.exp(log_rhs)

    lhs = [trace.errors[t] for t in boundaries]
    holds = all(l <= r + INEQUALITY_SLACK for l, r in zip(lhs, rhs))
    return ProductBoundCheck(
        boundaries=tuple(boundaries),
        deltas=deltas,
        lhs=lhs,
        rhs=[float(v) for v in rhs],
        holds=holds,
    )


def certify_rapid_decay(matrices: Sequence[np.ndarray], schedule: PhaseSchedule, k: int) -> RapidDecayCertificate:
    """Sufficient condition for ||x^T - x|| <= ||x^0 - x|| / 2^T.

    Holds when the duration-weighted geometric mean of the per-phase
    delta_3K stays at or below 1 / (2 sqrt 3).
    """
    _check_phase_count(matrices, schedule)
    _check_order(k, np.asarray(matrices[0]).shape[1])
    deltas = _phase_deltas(matrices, schedule, k)
    with np.errstate(divide="ignore"):
        mean = float(np.exp(np.dot(schedule.fractions, np.log(deltas))))
    threshold = 1 / (2 * math.sqrt(3))
    return RapidDecayCertificate(
        deltas=deltas,
        weighted_geometric_mean=mean,
        threshold=threshold,
        certified=mean <= threshold,
    )
