"""IHT iteration and the sequential (phase-driven) IHT driver."""
import math
from typing import Iterable, Optional

import numpy as np
from loguru import logger

from errors import DimensionMismatchError, ProtocolError
from models import MeasurementPhase, PhaseSchedule, RecoveryTrace, SparseSignal
from services.measurements import make_schedule
from services.sparse_core import hard_threshold, l2_error


def _check_columns(phase: MeasurementPhase, n: int) -> None:
    if phase.columns != n:
        raise DimensionMismatchError(f"phase matrix is {phase.rows}x{phase.columns}, signal has length {n}")


def _iht_update(x: np.ndarray, matrix: np.ndarray, y: np.ndarray, k: int) -> np.ndarray:
    return hard_threshold(x + matrix.T @ (y - matrix @ x), k)


def iht_step(x_prev: SparseSignal, phase: MeasurementPhase, k: int) -> SparseSignal:
    """One unit-step gradient move on ||y - Phi x||^2 / 2 followed by H_K."""
    _check_columns(phase, x_prev.dimension)
    x_next = _iht_update(x_prev.values, phase.matrix, phase.measurement, k)
    return SparseSignal(values=x_next, sparsity_budget=k)


def residual(phase: MeasurementPhase, x: SparseSignal) -> np.ndarray:
    _check_columns(phase, x.dimension)
    return phase.measurement - phase.matrix @ x.values


def run_siht(
    schedule: PhaseSchedule,
    phases: Iterable[MeasurementPhase],
    k: int,
    x0: Optional[SparseSignal] = None,
    truth: Optional[SparseSignal] = None,
    threshold: float = 1e-3,
    stop_at: Optional[float] = None,
    trace: bool = True,
) -> RecoveryTrace:
    """Run sequential IHT over ``schedule``.

    Exactly one phase is pulled from ``phases`` at each phase boundary, so the
    stream may be a generator that samples matrices on demand. Phase i runs
    tau_{i+1} IHT steps against its own (Phi, y).

    Args:
        schedule: phase boundaries 0 = t_0 < ... < t_s = T
        phases: iterable yielding at least s measurement phases
        k: sparsity budget
        x0: initial iterate, zero vector when omitted
        truth: ground truth; enables the error trace and the success flag
        threshold: success criterion on the final error
        stop_at: stop as soon as the error drops to this level (needs truth)
        trace: record per-step errors and residual norms

    Returns:
        RecoveryTrace
    """
    stream = iter(phases)
    x = None if x0 is None else x0.values.copy()
    if x is None and truth is not None:
        x = np.zeros(truth.dimension)
    if x is not None and truth is not None and truth.dimension != x.size:
        raise DimensionMismatchError(f"x0 has length {x.size}, truth has length {truth.dimension}")

    errors = [] if trace and truth is not None else None
    residual_norms = [] if trace else None
    initial_error = l2_error(x, truth.values) if truth is not None else None
    if errors is not None:
        errors.append(initial_error)

    t = 0
    stopped = False
    with np.errstate(over="ignore", invalid="ignore"):
        for i, tau in enumerate(schedule.durations):
            try:
                phase = next(stream)
            except StopIteration:
                raise ProtocolError(
                    f"phase stream ended after {i} of {schedule.phase_count} phases"
                ) from None
            if x is None:
                x = np.zeros(phase.columns)
            _check_columns(phase, x.size)

            for _ in range(tau):
                x = _iht_update(x, phase.matrix, phase.measurement, k)
                assert np.count_nonzero(x) <= k
                t += 1
                if residual_norms is not None:
                    residual_norms.append(float(np.linalg.norm(phase.measurement - phase.matrix @ x)))
                if truth is not None and (errors is not None or stop_at is not None):
                    err = l2_error(x, truth.values)
                    if errors is not None:
                        errors.append(err)
                    if stop_at is not None and err <= stop_at:
                        stopped = True
                        break
            if stopped:
                logger.debug(f"Stopped early at step {t} in phase {i}")
                break

    estimate = SparseSignal(values=x, sparsity_budget=k)
    final_error = success = rapid_decay = None
    if truth is not None:
        final_error = l2_error(x, truth.values)
        success = bool(final_error <= threshold)
        rapid_decay = bool(final_error <= math.ldexp(initial_error, -t))

    return RecoveryTrace(
        final_estimate=estimate,
        iterations=t,
        threshold=threshold,
        errors=errors,
        residual_norms=residual_norms,
        success=success,
        final_error=final_error,
        rapid_decay=rapid_decay,
    )


def run_offline_iht(
    phase: MeasurementPhase,
    k: int,
    iterations: int,
    x0: Optional[SparseSignal] = None,
    truth: Optional[SparseSignal] = None,
    threshold: float = 1e-3,
    stop_at: Optional[float] = None,
    trace: bool = True,
) -> RecoveryTrace:
    """Classical IHT with one fixed matrix: SIHT with a single phase of length T."""
    return run_siht(
        make_schedule([0, iterations]),
        [phase],
        k,
        x0=x0,
        truth=truth,
        threshold=threshold,
        stop_at=stop_at,
        trace=trace,
    )
