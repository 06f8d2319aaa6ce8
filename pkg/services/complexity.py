"""Dynamic sample complexity and the sufficient recovery condition built on it."""
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Sequence

import numpy as np
from loguru import logger

from errors import EnumerationLimitError, InvalidArgumentError
from models import ComplexityBreakdown, ConditionCheck, MonteCarloEstimate, PhaseSchedule
from services.measurements import derive_seed, draw_phase_sizes, per_step_schedule

CONDITION_C1 = 96.0
CONDITION_C2 = 288.0

_EXPECTED_MD_STREAM = "expected-md"


def _weighted_means(m: np.ndarray, p: np.ndarray, a_m: float):
    active = m[p > 0]
    if np.all(active == active[0]):
        # both means of a constant are that constant
        return float(active[0]), float(active[0])
    # AM-GM: clip rounding noise so that g_M <= a_M always holds
    g_m = min(float(np.exp(np.dot(p, np.log(m)))), a_m)
    return a_m, g_m


def _check_measurements(measurements: Sequence[int], s: int) -> np.ndarray:
    if len(measurements) != s:
        raise InvalidArgumentError(f"got {len(measurements)} measurement counts for {s} phases")
    m = np.asarray(measurements, dtype=np.float64)
    if m.size == 0 or np.any(m < 1):
        raise InvalidArgumentError(f"measurement counts must be >= 1, got {list(measurements)}")
    return m


def dynamic_sample_complexity(measurements: Sequence[int], schedule: PhaseSchedule) -> ComplexityBreakdown:
    """M_d = g_M^2 / (s * p_bar * a_M) for per-phase counts ``measurements``.

    Sums over the integer durations are divided by T once, so equal counts
    give a_M = g_M = M and s * p_bar = 1 without rounding.
    """
    s = schedule.phase_count
    m = _check_measurements(measurements, s)
    tau = np.asarray(schedule.durations, dtype=np.float64)
    horizon = schedule.horizon
    p = tau / horizon

    a_m, g_m = _weighted_means(m, p, float(np.dot(tau, m)) / horizon)
    s_pbar = s * max(schedule.durations) / horizon
    return ComplexityBreakdown(
        measurements=tuple(int(v) for v in measurements),
        fractions=schedule.fractions,
        s=s,
        p_bar=schedule.p_bar,
        a_m=a_m,
        g_m=g_m,
        md=(g_m / a_m) * g_m / s_pbar,
    )


def breakdown_from_fractions(measurements: Sequence[int], fractions: Sequence[float]) -> ComplexityBreakdown:
    """Same as :func:`dynamic_sample_complexity` with explicit p_j instead of a schedule."""
    p = np.asarray(fractions, dtype=np.float64)
    m = _check_measurements(measurements, p.size)
    if np.any(p < 0) or not math.isclose(float(p.sum()), 1.0, abs_tol=1e-9):
        raise InvalidArgumentError(f"fractions must be non-negative and sum to 1, got {list(fractions)}")

    s = p.size
    p_bar = float(p.max())
    a_m, g_m = _weighted_means(m, p, float(np.dot(p, m)))
    return ComplexityBreakdown(
        measurements=tuple(int(v) for v in measurements),
        fractions=tuple(float(v) for v in p),
        s=s,
        p_bar=p_bar,
        a_m=a_m,
        g_m=g_m,
        md=(g_m / a_m) * g_m / (s * p_bar),
    )


def condition_rhs(k: int, n: int, epsilon: float, c_tilde: float) -> float:
    """C1 ln(6K) + C2 K ln(3Ne/K) + C3 ln(1/eps) with C1 = C3 = 96/c~, C2 = 288/c~."""
    if c_tilde <= 0:
        raise InvalidArgumentError(f"c_tilde must be positive, got {c_tilde}")
    if not 1 <= k <= n:
        raise InvalidArgumentError(f"need 1 <= K <= N, got K={k}, N={n}")
    if not 0 < epsilon <= 1:
        raise InvalidArgumentError(f"epsilon must lie in (0, 1], got {epsilon}")
    c1 = c3 = CONDITION_C1 / c_tilde
    c2 = CONDITION_C2 / c_tilde
    return c1 * math.log(6 * k) + c2 * k * math.log(3 * n * math.e / k) + c3 * math.log(1 / epsilon)


def satisfies_condition(
    breakdown: ComplexityBreakdown, k: int, n: int, epsilon: float, c_tilde: float
) -> ConditionCheck:
    rhs = condition_rhs(k, n, epsilon, c_tilde)
    return ConditionCheck(satisfied=breakdown.md >= rhs, margin=breakdown.md - rhs, rhs=rhs)


def minimum_upper_range(alpha: float, k: int, n: int, epsilon: float, c_tilde: float) -> int:
    """Smallest integer b with 2 alpha b / (9 (alpha + 1)) >= condition RHS, for alpha = b / a."""
    if alpha < 1:
        raise InvalidArgumentError(f"alpha = b/a must be >= 1, got {alpha}")
    rhs = condition_rhs(k, n, epsilon, c_tilde)
    return math.ceil(9 * (alpha + 1) * rhs / (2 * alpha))


def _check_range(a: int, b: int) -> None:
    if a < 2 or a > b:
        raise InvalidArgumentError(f"the expected-M_d bound needs 2 <= a <= b, got a={a}, b={b}")


def expected_md_lower_bound(a: int, b: int) -> float:
    """2 b^2 / (9 (a + b)), a strict lower bound on E[M_d] for uniform M_j on [a, b]."""
    _check_range(a, b)
    return 2 * b * b / (9 * (a + b))


def _md_batch(a: int, b: int, s: int, seed: int, start: int, stop: int) -> np.ndarray:
    schedule = per_step_schedule(s)
    return np.array(
        [
            dynamic_sample_complexity(
                draw_phase_sizes(a, b, s, derive_seed(seed, _EXPECTED_MD_STREAM, r)), schedule
            ).md
            for r in range(start, stop)
        ]
    )


def estimate_expected_md(
    a: int, b: int, s: int, trials: int, seed: int, workers: int = 1
) -> MonteCarloEstimate:
    """Monte Carlo estimate of E[M_d] with p_j = 1/s and M_j uniform on [a, b].

    Trial r uses its own derived stream, so the estimate does not depend on
    ``workers``.
    """
    _check_range(a, b)
    if s < 1 or trials < 1:
        raise InvalidArgumentError(f"need s >= 1 and trials >= 1, got s={s}, trials={trials}")

    if workers <= 1:
        samples = _md_batch(a, b, s, seed, 0, trials)
    else:
        edges = np.linspace(0, trials, workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as executor:
            parts = executor.map(
                _md_batch,
                *zip(*[(a, b, s, seed, lo, hi) for lo, hi in zip(edges, edges[1:])]),
            )
            samples = np.concatenate(list(parts))

    std_error = float(np.std(samples, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    estimate = MonteCarloEstimate(mean=float(np.mean(samples)), std_error=std_error, trials=trials)
    logger.info(f"E[M_d] for a={a}, b={b}, s={s}: {estimate.mean:.4f} +/- {estimate.std_error:.4f}")
    return estimate


def exact_expected_md(a: int, b: int, s: int, cap: int = 10**6) -> float:
    """E[M_d] by enumerating all (b - a + 1)^s equally likely outcomes."""
    _check_range(a, b)
    if s < 1:
        raise InvalidArgumentError(f"phase count must be >= 1, got {s}")
    outcomes = (b - a + 1) ** s
    if outcomes > cap:
        raise EnumerationLimitError(outcomes, cap)
    schedule = per_step_schedule(s)
    mds = [
        dynamic_sample_complexity(sizes, schedule).md
        for sizes in itertools.product(range(a, b + 1), repeat=s)
    ]
    return float(np.mean(mds))
