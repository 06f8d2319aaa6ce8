"""Phase schedules, measurement ensembles and ground-truth signals.

All sampling goes through a counter-based Philox generator. A stream is
addressed by ``derive_seed(master_seed, *keys)``: the keys land in the
SeedSequence spawn key, so the stream for (trial r, phase j) depends only on
(master_seed, r, j) and not on the order in which trials run.
"""
import hashlib
from typing import Iterable, Iterator, List, Sequence, Union

import numpy as np
from loguru import logger
from pydantic import ValidationError

from errors import InvalidArgumentError
from models import EnsembleSpec, MeasurementPhase, PhaseSchedule, SparseSignal

SeedLike = Union[int, np.random.SeedSequence]

_UNIFORM_HALF_WIDTH = np.sqrt(3.0)  # U[-sqrt 3, sqrt 3] has unit variance


def stream_key(tag: str) -> int:
    """Stable 32-bit integer for a textual stream label."""
    return int.from_bytes(hashlib.sha256(tag.encode("utf-8")).digest()[:4], "little")


def derive_seed(master_seed: int, *keys: Union[int, str]) -> np.random.SeedSequence:
    spawn_key = tuple(stream_key(k) if isinstance(k, str) else int(k) for k in keys)
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=spawn_key)


def make_rng(seed: SeedLike) -> np.random.Generator:
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(seed))


# Schedules

def make_schedule(boundaries: Sequence[int]) -> PhaseSchedule:
    try:
        return PhaseSchedule(boundaries=tuple(int(b) for b in boundaries))
    except ValidationError as e:
        raise InvalidArgumentError(f"invalid phase boundaries {list(boundaries)}: {e.errors()[0]['msg']}") from e


def per_step_schedule(horizon: int) -> PhaseSchedule:
    """One phase per time step (s = T, every p_j = 1/T)."""
    if horizon < 1:
        raise InvalidArgumentError(f"horizon must be >= 1, got {horizon}")
    return make_schedule(range(horizon + 1))


# Random draws

def draw_phase_sizes(a: int, b: int, s: int, seed: SeedLike) -> List[int]:
    """Draw s measurement counts independently and uniformly from {a, ..., b}."""
    if a < 1 or a > b:
        raise InvalidArgumentError(f"need 1 <= a <= b, got a={a}, b={b}")
    if s < 1:
        raise InvalidArgumentError(f"phase count must be >= 1, got {s}")
    rng = make_rng(seed)
    return rng.integers(a, b, endpoint=True, size=s).tolist()


def sample_matrix(spec: EnsembleSpec, m: int, n: int, seed: SeedLike) -> np.ndarray:
    """Phi = A / sqrt(M) with unit-variance i.i.d. entries in A."""
    if m < 1 or n < 1:
        raise InvalidArgumentError(f"matrix sizes must be positive, got {m}x{n}")

    if spec.family == "identity":
        if m != n:
            raise InvalidArgumentError(f"identity ensemble is square only, got {m}x{n}")
        return np.eye(n)

    rng = make_rng(seed)
    if spec.family == "gaussian":
        a = rng.standard_normal((m, n))
    elif spec.family == "rademacher":
        a = rng.integers(0, 2, size=(m, n)) * 2.0 - 1.0
    elif spec.family == "uniform-symmetric":
        a = rng.uniform(-_UNIFORM_HALF_WIDTH, _UNIFORM_HALF_WIDTH, size=(m, n))
    else:
        raise InvalidArgumentError(f"unsupported ensemble family {spec.family!r}")
    return a / np.sqrt(m)


def sample_signal(n: int, k: int, seed: SeedLike) -> SparseSignal:
    """K-sparse signal: uniform random support of size K, standard normal nonzeros."""
    if not 1 <= k <= n:
        raise InvalidArgumentError(f"K={k} outside [1, {n}]")
    rng = make_rng(seed)
    idx = rng.choice(n, size=k, replace=False)
    values = np.zeros(n)
    values[idx] = rng.standard_normal(k)
    return SparseSignal(values=values, sparsity_budget=k)


def rows_for(spec: EnsembleSpec, m: int, n: int) -> int:
    """Row count actually used for an ensemble; the identity ensemble is always N x N."""
    return n if spec.family == "identity" else m


def make_phase(matrix: np.ndarray, truth: SparseSignal) -> MeasurementPhase:
    """Noiseless measurement y = Phi x."""
    return MeasurementPhase(matrix=matrix, measurement=matrix @ truth.values)


def phase_stream(
    spec: EnsembleSpec,
    sizes: Iterable[int],
    truth: SparseSignal,
    seeds: Iterable[SeedLike],
) -> Iterator[MeasurementPhase]:
    """Lazily yield one freshly sampled phase per (size, seed) pair."""
    n = truth.dimension
    for j, (m, seed) in enumerate(zip(sizes, seeds)):
        rows = rows_for(spec, m, n)
        logger.debug(f"Sampling phase {j}: {rows}x{n} {spec.family}")
        yield make_phase(sample_matrix(spec, rows, n, seed), truth)
