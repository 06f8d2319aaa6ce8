from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    computed_field,
    field_validator,
    model_validator,
)

from config import get_settings


def _frozen_vector(value) -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"expected a non-empty 1-D vector, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


# Signals and supports

class SparseSignal(BaseModel):
    """A length-N real vector together with its sparsity budget K.

    Used both for the ground truth and for the algorithm iterates; in both
    cases at most K entries are nonzero.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    sparsity_budget: int

    @field_validator("values", mode="before")
    @classmethod
    def _coerce_values(cls, value):
        return _frozen_vector(value)

    @model_validator(mode="after")
    def _check_budget(self):
        n = self.values.size
        if not 1 <= self.sparsity_budget <= n:
            raise ValueError(f"sparsity budget {self.sparsity_budget} outside [1, {n}]")
        nonzeros = int(np.count_nonzero(self.values))
        if nonzeros > self.sparsity_budget:
            raise ValueError(f"{nonzeros} nonzero entries exceed budget {self.sparsity_budget}")
        return self

    @property
    def dimension(self) -> int:
        return int(self.values.size)

    @classmethod
    def zeros(cls, dimension: int, sparsity_budget: int) -> "SparseSignal":
        return cls(values=np.zeros(dimension), sparsity_budget=sparsity_budget)


class IndexSet(BaseModel):
    """Sorted, duplicate-free set of coordinates in [0, dimension)."""

    model_config = ConfigDict(frozen=True)

    indices: Tuple[int, ...] = ()
    dimension: Optional[int] = Field(default=None, ge=0)

    @field_validator("indices", mode="before")
    @classmethod
    def _sort_indices(cls, value):
        items = [int(i) for i in value]
        if len(set(items)) != len(items):
            raise ValueError("index set contains duplicates")
        if any(i < 0 for i in items):
            raise ValueError("indices must be non-negative")
        return tuple(sorted(items))

    @model_validator(mode="after")
    def _check_bound(self):
        if self.dimension is not None and self.indices and self.indices[-1] >= self.dimension:
            raise ValueError(f"index {self.indices[-1]} out of range for dimension {self.dimension}")
        return self

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, item) -> bool:
        return item in self.indices

    def issubset(self, other: "IndexSet") -> bool:
        return set(self.indices) <= set(other.indices)


# Measurement model

class PhaseSchedule(BaseModel):
    """Phase boundaries 0 = t_0 < t_1 < ... < t_s = T."""

    model_config = ConfigDict(frozen=True)

    boundaries: Tuple[int, ...]

    @field_validator("boundaries")
    @classmethod
    def _check_boundaries(cls, value):
        if len(value) < 2:
            raise ValueError("a schedule needs at least the boundaries [0, T]")
        if value[0] != 0:
            raise ValueError("first boundary must be 0")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("boundaries must be strictly increasing")
        return value

    @computed_field
    @property
    def horizon(self) -> int:
        return self.boundaries[-1]

    @computed_field
    @property
    def phase_count(self) -> int:
        return len(self.boundaries) - 1

    @computed_field
    @property
    def durations(self) -> Tuple[int, ...]:
        return tuple(b - a for a, b in zip(self.boundaries, self.boundaries[1:]))

    @computed_field
    @property
    def fractions(self) -> Tuple[float, ...]:
        return tuple(tau / self.horizon for tau in self.durations)

    @computed_field
    @property
    def p_bar(self) -> float:
        return max(self.fractions)


EnsembleFamily = Literal["gaussian", "rademacher", "uniform-symmetric", "identity"]


class EnsembleSpec(BaseModel):
    """Entry distribution of the unscaled matrix A.

    Every random family has unit-variance, i.i.d. sub-Gaussian entries; the
    sub-Gaussian parameter itself is never needed numerically. ``identity``
    is a deterministic test ensemble (Phi = I, square only).
    """

    model_config = ConfigDict(frozen=True)

    family: EnsembleFamily = "gaussian"


class MeasurementPhase(BaseModel):
    """The (Phi_j, y_j) pair received at the start of a phase."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrix: np.ndarray
    measurement: np.ndarray

    @field_validator("matrix", mode="before")
    @classmethod
    def _coerce_matrix(cls, value):
        arr = np.array(value, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
        arr.flags.writeable = False
        return arr

    @field_validator("measurement", mode="before")
    @classmethod
    def _coerce_measurement(cls, value):
        return _frozen_vector(value)

    @model_validator(mode="after")
    def _check_shapes(self):
        if self.measurement.size != self.matrix.shape[0]:
            raise ValueError(
                f"measurement length {self.measurement.size} != matrix rows {self.matrix.shape[0]}"
            )
        return self

    @property
    def rows(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def columns(self) -> int:
        return int(self.matrix.shape[1])


# Recovery

class RecoveryTrace(BaseModel):
    model_config = ConfigDict(frozen=True)

    final_estimate: SparseSignal
    iterations: int
    threshold: float
    errors: Optional[List[float]] = None
    residual_norms: Optional[List[float]] = None
    success: Optional[bool] = None
    final_error: Optional[float] = None
    rapid_decay: Optional[bool] = None


# Complexity

class ComplexityBreakdown(BaseModel):
    """Weighted means of the phase measurement counts and M_d."""

    model_config = ConfigDict(frozen=True)

    measurements: Tuple[int, ...]
    fractions: Tuple[float, ...]
    s: int
    p_bar: float
    a_m: float
    g_m: float
    md: float


class ConditionCheck(BaseModel):
    satisfied: bool
    margin: float
    rhs: float


class MonteCarloEstimate(BaseModel):
    mean: float
    std_error: float
    trials: int


# RIC oracle

class RicResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    order: int
    value: float = Field(ge=0)
    witness: IndexSet


class ContractionCheck(BaseModel):
    ratio: float
    bound: float
    delta: float
    holds: bool


class ProductBoundCheck(BaseModel):
    boundaries: Tuple[int, ...]
    deltas: List[float]
    lhs: List[float]
    rhs: List[float]
    holds: bool


class RapidDecayCertificate(BaseModel):
    deltas: List[float]
    weighted_geometric_mean: float
    threshold: float
    certified: bool


# Experiments

RecoveryMode = Literal["siht", "offline"]


def _coerce_ensemble(value):
    if isinstance(value, str):
        return EnsembleSpec(family=value)
    return value


class ExperimentConfig(BaseModel):
    """Protocol parameters of a recovery experiment."""

    model_config = ConfigDict(
        frozen=True,
        extra="forbid",
        json_schema_extra={
            "example": {
                "n": 1000,
                "t": 100,
                "k_grid": [5, 10, 15],
                "trials": 100,
                "mode": "siht",
                "a": 20,
                "b": 150,
                "master_seed": 7,
            }
        },
    )

    master_seed: int = Field(ge=0)
    n: int = Field(1000, ge=1)
    t: int = Field(100, ge=1)
    k_grid: Tuple[int, ...] = (5,)
    trials: int = Field(100, ge=1)
    threshold: float = Field(1e-3, gt=0)
    mode: RecoveryMode = "siht"
    a: int = Field(20, ge=1)
    b: int = Field(150, ge=1)
    m: int = Field(250, ge=1)
    ensemble: EnsembleSpec = EnsembleSpec()
    workers: int = Field(default_factory=lambda: get_settings().workers, ge=1)
    stop_early: bool = False

    @field_validator("ensemble", mode="before")
    @classmethod
    def _parse_ensemble(cls, value):
        return _coerce_ensemble(value)

    @model_validator(mode="after")
    def _check_protocol(self):
        if not self.k_grid:
            raise ValueError("k_grid must not be empty")
        bad = [k for k in self.k_grid if not 1 <= k <= self.n]
        if bad:
            raise ValueError(f"sparsity levels {bad} outside [1, {self.n}]")
        if self.mode == "siht" and self.a > self.b:
            raise ValueError(f"a={self.a} exceeds b={self.b}")
        return self


def _default_axis() -> Tuple[int, ...]:
    return tuple(range(20, 201, 20))


class PhaseDiagramConfig(BaseModel):
    """SIHT recovery probability over a grid of measurement ranges [a, b]."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    master_seed: int = Field(ge=0)
    a_values: Tuple[int, ...] = Field(default_factory=_default_axis)
    b_values: Tuple[int, ...] = Field(default_factory=_default_axis)
    range_limit: int = Field(200, ge=1)
    n: int = Field(1000, ge=1)
    t: int = Field(100, ge=1)
    k: int = Field(5, ge=1)
    trials: int = Field(100, ge=1)
    threshold: float = Field(1e-3, gt=0)
    ensemble: EnsembleSpec = EnsembleSpec()
    workers: int = Field(default_factory=lambda: get_settings().workers, ge=1)

    @field_validator("ensemble", mode="before")
    @classmethod
    def _parse_ensemble(cls, value):
        return _coerce_ensemble(value)

    @model_validator(mode="after")
    def _check_grid(self):
        for name in ("a_values", "b_values"):
            axis = getattr(self, name)
            if not axis:
                raise ValueError(f"{name} must not be empty")
            if any(b <= a for a, b in zip(axis, axis[1:])):
                raise ValueError(f"{name} must be strictly increasing")
            if axis[0] < 1 or axis[-1] > self.range_limit:
                raise ValueError(f"{name} must lie within [1, {self.range_limit}]")
        if self.k > self.n:
            raise ValueError(f"k={self.k} exceeds n={self.n}")
        return self

    def cell_config(self, a: int, b: int) -> ExperimentConfig:
        return ExperimentConfig(
            master_seed=self.master_seed,
            n=self.n,
            t=self.t,
            k_grid=(self.k,),
            trials=self.trials,
            threshold=self.threshold,
            mode="siht",
            a=a,
            b=b,
            ensemble=self.ensemble,
            workers=self.workers,
        )


class TrialOutcome(BaseModel):
    success: bool
    final_error: float


class SweepRow(BaseModel):
    k: int
    mode: RecoveryMode
    param_a: Optional[int] = None
    param_b: Optional[int] = None
    param_m: Optional[int] = None
    trials: int
    successes: int
    mean_final_error: float

    @computed_field
    @property
    def probability(self) -> float:
        return self.successes / self.trials


class SweepResult(BaseModel):
    rows: List[SweepRow]


class PhaseCell(BaseModel):
    a: int
    b: int
    valid: bool
    trials: int
    successes: int

    @computed_field
    @property
    def probability(self) -> float:
        return self.successes / self.trials if self.valid else 0.0


class PhaseDiagramResult(BaseModel):
    a_values: Tuple[int, ...]
    b_values: Tuple[int, ...]
    cells: List[PhaseCell]

    def probability_grid(self) -> np.ndarray:
        """Probabilities as an image: row 0 is the largest b, columns follow a."""
        lookup = {(c.a, c.b): c.probability for c in self.cells}
        return np.array(
            [[lookup[(a, b)] for a in self.a_values] for b in reversed(self.b_values)],
            dtype=np.float64,
        )
