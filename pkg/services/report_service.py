import csv
import io
from pathlib import Path
from typing import Union

import numpy as np
from loguru import logger

from errors import InvalidArgumentError, OutputError
from models import PhaseDiagramResult, SweepResult

PathLike = Union[str, Path]


class ReportService:
    """Reads matrix inputs and writes the CSV / PGM experiment artifacts."""

    SWEEP_HEADER = [
        "k", "mode", "param_a", "param_b", "param_m",
        "trials", "successes", "probability", "mean_final_error",
    ]
    PHASE_HEADER = ["a", "b", "valid", "trials", "successes", "probability"]

    @staticmethod
    def format_decimal(value: float) -> str:
        """17 significant digits: enough to round-trip any float64."""
        return format(value, ".17g")

    @staticmethod
    def _optional(value) -> str:
        return "" if value is None else str(value)

    def _write_text(self, path: PathLike, text: str) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as e:
            logger.error(f"Failed writing {path}: {e}")
            raise OutputError(path, str(e)) from e
        return path

    def sweep_csv(self, result: SweepResult) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.SWEEP_HEADER)
        for row in result.rows:
            writer.writerow([
                row.k,
                row.mode,
                self._optional(row.param_a),
                self._optional(row.param_b),
                self._optional(row.param_m),
                row.trials,
                row.successes,
                self.format_decimal(row.probability),
                self.format_decimal(row.mean_final_error),
            ])
        return buffer.getvalue()

    def phase_csv(self, result: PhaseDiagramResult) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.PHASE_HEADER)
        for cell in result.cells:
            writer.writerow([
                cell.a,
                cell.b,
                "valid" if cell.valid else "invalid",
                cell.trials,
                cell.successes,
                self.format_decimal(cell.probability),
            ])
        return buffer.getvalue()

    @staticmethod
    def encode_pgm(grid: np.ndarray) -> bytes:
        """Binary P5 image, maxval 255, pixel = round-half-up(255 * probability)."""
        grid = np.asarray(grid, dtype=np.float64)
        if grid.ndim != 2:
            raise InvalidArgumentError(f"expected a 2-D probability grid, got shape {grid.shape}")
        height, width = grid.shape
        pixels = np.floor(255 * np.clip(grid, 0.0, 1.0) + 0.5).astype(np.uint8)
        return f"P5\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes(order="C")

    def write_sweep_csv(self, result: SweepResult, path: PathLike) -> Path:
        out = self._write_text(path, self.sweep_csv(result))
        logger.success(f"Sweep written to {out} ({len(result.rows)} rows)")
        return out

    def write_phase_csv(self, result: PhaseDiagramResult, path: PathLike) -> Path:
        out = self._write_text(path, self.phase_csv(result))
        logger.success(f"Phase diagram table written to {out}")
        return out

    def write_pgm(self, result: PhaseDiagramResult, path: PathLike) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(self.encode_pgm(result.probability_grid()))
        except OSError as e:
            logger.error(f"Failed writing {path}: {e}")
            raise OutputError(path, str(e)) from e
        logger.success(f"Phase diagram image written to {path}")
        return path

    @staticmethod
    def parse_matrix_csv(text: str) -> np.ndarray:
        """Rows of comma-separated decimals to a float matrix."""
        try:
            matrix = np.loadtxt(io.StringIO(text), delimiter=",", ndmin=2, dtype=np.float64)
        except ValueError as e:
            raise InvalidArgumentError(f"malformed matrix CSV: {e}") from e
        if matrix.size == 0 or not np.all(np.isfinite(matrix)):
            raise InvalidArgumentError("matrix CSV must contain finite entries")
        return matrix

    def read_matrix_csv(self, path: PathLike) -> np.ndarray:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except UnicodeDecodeError as e:
            raise InvalidArgumentError(f"matrix file {path} is not UTF-8 encoded") from e
        except OSError as e:
            raise OutputError(path, str(e)) from e
        matrix = self.parse_matrix_csv(text)
        logger.info(f"Loaded {matrix.shape[0]}x{matrix.shape[1]} matrix from {path}")
        return matrix
