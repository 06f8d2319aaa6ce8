import itertools
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from models import (
    ExperimentConfig,
    PhaseCell,
    PhaseDiagramConfig,
    PhaseDiagramResult,
    RecoveryTrace,
    SweepResult,
    SweepRow,
    TrialOutcome,
)
from services.measurements import (
    derive_seed,
    draw_phase_sizes,
    make_phase,
    per_step_schedule,
    phase_stream,
    rows_for,
    sample_matrix,
    sample_signal,
)
from services.recovery import run_offline_iht, run_siht
from services.report_service import PathLike, ReportService

SWEEP_STREAM = "sweep"
PHASE_DIAGRAM_STREAM = "phase-diagram"

# sub-streams of one trial
_SIGNAL, _SIZES, _PHASE, _OFFLINE = range(4)

REFERENCE_K_GRID = (5, 10, 15, 20, 25, 30, 35)
REFERENCE_OFFLINE_M = (100, 200, 250)

TrialKey = Tuple


def recover(config: ExperimentConfig, k: int, key: TrialKey, trace: bool = True) -> RecoveryTrace:
    """One draw-and-recover run addressed by ``key``.

    The ground truth depends on the key only, so SIHT and offline runs that
    share a key are paired on the same signal.
    """
    seed = config.master_seed
    truth = sample_signal(config.n, k, derive_seed(seed, *key, _SIGNAL))
    stop_at = config.threshold if config.stop_early else None

    if config.mode == "siht":
        sizes = draw_phase_sizes(config.a, config.b, config.t, derive_seed(seed, *key, _SIZES))
        seeds = (derive_seed(seed, *key, _PHASE, j) for j in range(config.t))
        return run_siht(
            per_step_schedule(config.t),
            phase_stream(config.ensemble, sizes, truth, seeds),
            k,
            truth=truth,
            threshold=config.threshold,
            stop_at=stop_at,
            trace=trace,
        )

    rows = rows_for(config.ensemble, config.m, config.n)
    matrix = sample_matrix(config.ensemble, rows, config.n, derive_seed(seed, *key, _OFFLINE, rows))
    return run_offline_iht(
        make_phase(matrix, truth),
        k,
        config.t,
        truth=truth,
        threshold=config.threshold,
        stop_at=stop_at,
        trace=trace,
    )


def trial(config: ExperimentConfig, k: int, trial_index: int) -> TrialOutcome:
    """A single sweep trial; fully determined by (config, k, trial_index)."""
    result = recover(config, k, (SWEEP_STREAM, k, trial_index), trace=False)
    return TrialOutcome(success=result.success, final_error=result.final_error)


def _run_task(task: Tuple[ExperimentConfig, int, TrialKey]) -> TrialOutcome:
    config, k, key = task
    result = recover(config, k, key, trace=False)
    return TrialOutcome(success=result.success, final_error=result.final_error)


class ExperimentService:
    """Monte Carlo recovery experiments over a bounded process pool.

    Tasks are dispatched with ``executor.map``, so outcomes come back in
    submission order whatever the completion order and the worker count.
    """

    def __init__(self, workers: int = 1, report_service: Optional[ReportService] = None):
        self.workers = max(1, int(workers))
        self.report_service = report_service or ReportService()

    def _run_tasks(self, tasks: List[Tuple[ExperimentConfig, int, TrialKey]]) -> List[TrialOutcome]:
        if self.workers == 1 or len(tasks) <= 1:
            return [_run_task(t) for t in tasks]
        chunksize = max(1, len(tasks) // (self.workers * 4))
        with ProcessPoolExecutor(max_workers=self.workers) as executor:
            return list(executor.map(_run_task, tasks, chunksize=chunksize))

    @staticmethod
    def _aggregate(outcomes: Sequence[TrialOutcome]) -> Tuple[int, float]:
        successes = sum(o.success for o in outcomes)
        with np.errstate(over="ignore", invalid="ignore"):
            mean_error = float(np.mean([o.final_error for o in outcomes]))
        return successes, mean_error

    @staticmethod
    def sweep_modes(config: ExperimentConfig, baselines: Iterable[int] = ()) -> List[ExperimentConfig]:
        """The configured mode followed by one offline config per extra baseline M."""
        modes = [config]
        seen = {config.m} if config.mode == "offline" else set()
        for m in baselines:
            if m not in seen:
                modes.append(config.model_copy(update={"mode": "offline", "m": int(m)}))
                seen.add(m)
        return modes

    def run_recovery_sweep(
        self,
        config: ExperimentConfig,
        output_path: Optional[PathLike] = None,
        baselines: Iterable[int] = (),
    ) -> SweepResult:
        """Recovery probability for every (K, mode) cell; rows are K-major."""
        modes = self.sweep_modes(config, baselines)
        cells = [(k, mode) for k in config.k_grid for mode in modes]
        tasks = [
            (mode, k, (SWEEP_STREAM, k, r))
            for k, mode in cells
            for r in range(config.trials)
        ]
        logger.info(f"Sweep: {len(cells)} cells x {config.trials} trials on {self.workers} workers")
        outcomes = self._run_tasks(tasks)

        rows = []
        for i, (k, mode) in enumerate(cells):
            successes, mean_error = self._aggregate(outcomes[i * config.trials:(i + 1) * config.trials])
            siht = mode.mode == "siht"
            rows.append(
                SweepRow(
                    k=k,
                    mode=mode.mode,
                    param_a=mode.a if siht else None,
                    param_b=mode.b if siht else None,
                    param_m=None if siht else mode.m,
                    trials=config.trials,
                    successes=successes,
                    mean_final_error=mean_error,
                )
            )
            logger.info(f"K={k} {mode.mode}: {successes}/{config.trials} recovered")

        result = SweepResult(rows=rows)
        if output_path is not None:
            self.report_service.write_sweep_csv(result, output_path)
        return result

    def run_phase_diagram(
        self,
        config: PhaseDiagramConfig,
        pgm_path: Optional[PathLike] = None,
        csv_path: Optional[PathLike] = None,
    ) -> PhaseDiagramResult:
        """SIHT recovery probability on the (a, b) grid; cells with a > b are invalid."""
        grid = list(itertools.product(config.a_values, config.b_values))
        valid = [(a, b) for a, b in grid if a <= b]
        tasks = [
            (config.cell_config(a, b), config.k, (PHASE_DIAGRAM_STREAM, config.k, a, b, r))
            for a, b in valid
            for r in range(config.trials)
        ]
        logger.info(f"Phase diagram: {len(valid)} valid cells x {config.trials} trials")
        outcomes = self._run_tasks(tasks)

        successes = {}
        for i, cell in enumerate(valid):
            successes[cell], _ = self._aggregate(outcomes[i * config.trials:(i + 1) * config.trials])

        cells = [
            PhaseCell(
                a=a,
                b=b,
                valid=(a, b) in successes,
                trials=config.trials,
                successes=successes.get((a, b), 0),
            )
            for a, b in grid
        ]
        result = PhaseDiagramResult(a_values=config.a_values, b_values=config.b_values, cells=cells)
        if pgm_path is not None:
            self.report_service.write_pgm(result, Path(pgm_path))
        if csv_path is not None:
            self.report_service.write_phase_csv(result, Path(csv_path))
        return result
