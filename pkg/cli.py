"""Command line entry point: ``python cli.py <subcommand> [options]``.

Exit codes: 0 on success, 1 on validation errors (including bad flags), 2 on
I/O errors.
"""
import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from loguru import logger
from pydantic import ValidationError

from config import configure_logging, get_settings
from errors import InvalidArgumentError, OutputError, SihtError
from models import ExperimentConfig, PhaseDiagramConfig
from services.complexity import (
    breakdown_from_fractions,
    dynamic_sample_complexity,
    estimate_expected_md,
    expected_md_lower_bound,
    satisfies_condition,
)
from services.experiment_service import (
    REFERENCE_K_GRID,
    REFERENCE_OFFLINE_M,
    SWEEP_STREAM,
    ExperimentService,
    recover,
)
from services.measurements import make_schedule
from services.report_service import ReportService
from services.ric_oracle import ric

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    """argparse that reports usage problems as exit code 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


def _int_list(text: str) -> List[int]:
    """Comma list (``5,10,15``) or inclusive range (``20:180:40``)."""
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            start, stop = parts[0], parts[1]
            step = parts[2] if len(parts) > 2 else 1
            return list(range(start, stop + 1, step))
        return [int(p) for p in text.split(",") if p.strip()]
    except (ValueError, IndexError) as e:
        raise argparse.ArgumentTypeError(f"not an integer list: {text!r}") from e


def _float_list(text: str) -> List[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from e


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON config file; flags override its keys")
    parser.add_argument("--seed", type=int, required=True, dest="master_seed", help="master seed")
    parser.add_argument("--n", type=int)
    parser.add_argument("--t", type=int)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--threshold", type=float)
    parser.add_argument("--ensemble", choices=["gaussian", "rademacher", "uniform-symmetric", "identity"])
    parser.add_argument("--workers", type=int, help="worker processes (default: SIHT_WORKERS or CPU count)")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="siht", description="Sequential iterative hard thresholding toolkit")
    parser.add_argument("--log-level", default=None, help="loguru level (default from SIHT_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("recover", help="single recovery run, prints the trace")
    _add_experiment_flags(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--mode", choices=["siht", "offline"])
    p.add_argument("--a", type=int)
    p.add_argument("--b", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--trial-index", type=int, default=0)
    p.add_argument("--stop-early", action="store_true", default=None, help="stop once the error is below threshold")

    p = sub.add_parser("sweep", help="recovery probability versus K")
    _add_experiment_flags(p)
    p.add_argument("--k-grid", type=_int_list)
    p.add_argument("--mode", choices=["siht", "offline"])
    p.add_argument("--a", type=int)
    p.add_argument("--b", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--baseline-m", type=_int_list, default=[], help="extra offline IHT baselines")
    p.add_argument("--reference-grid", action="store_true", help="K 5..35, SIHT a=20 b=150, offline M 100,200,250")
    p.add_argument("--output", type=Path, default=None)

    p = sub.add_parser("phase-diagram", help="SIHT recovery probability over (a, b)")
    _add_experiment_flags(p)
    p.add_argument("--k", type=int)
    p.add_argument("--a-values", type=_int_list)
    p.add_argument("--b-values", type=_int_list)
    p.add_argument("--range-limit", type=int)
    p.add_argument("--output-pgm", type=Path, default=None)
    p.add_argument("--output-csv", type=Path, default=None)

    p = sub.add_parser("complexity", help="dynamic sample complexity and condition check")
    p.add_argument("--m", type=_int_list, help="measurement counts per phase")
    p.add_argument("--p", type=_float_list, help="phase fractions (alternative to --boundaries)")
    p.add_argument("--boundaries", type=_int_list, help="phase boundaries 0=t_0<...<t_s=T")
    p.add_argument("--k", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--c-tilde", type=float, default=None)
    p.add_argument("--range", type=_int_list, dest="uniform_range", help="a,b for the expected-M_d bound")
    p.add_argument("--s", type=int, default=10)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("ric", help="exact restricted isometry constant of a CSV matrix")
    p.add_argument("--matrix", type=Path, required=True)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--cap", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    return parser


def _merge(args: argparse.Namespace, keys: List[str]) -> Dict[str, Any]:
    """File values first, then every flag that was actually given."""
    values: Dict[str, Any] = {}
    if getattr(args, "config", None) is not None:
        try:
            values.update(json.loads(args.config.read_text(encoding="utf-8")))
        except OSError as e:
            raise OutputError(args.config, str(e)) from e
        except json.JSONDecodeError as e:
            raise InvalidArgumentError(f"config file {args.config} is not valid JSON: {e}") from e
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            values[key] = value
    settings = get_settings()
    values.setdefault("workers", settings.workers)
    values.setdefault("n", settings.default_n)
    values.setdefault("t", settings.default_t)
    values.setdefault("trials", settings.default_trials)
    values.setdefault("threshold", settings.default_threshold)
    return values


_EXPERIMENT_KEYS = ["master_seed", "n", "t", "trials", "threshold", "ensemble", "workers"]


def _emit(payload: Dict[str, Any]) -> None:
    print(json.dumps(payload, indent=2))


def _cmd_recover(args) -> None:
    values = _merge(args, _EXPERIMENT_KEYS + ["mode", "a", "b", "m", "stop_early"])
    values["k_grid"] = [args.k]
    config = ExperimentConfig(**values)
    trace = recover(config, args.k, (SWEEP_STREAM, args.k, args.trial_index))
    _emit({
        "mode": config.mode,
        "k": args.k,
        "iterations": trace.iterations,
        "success": trace.success,
        "final_error": trace.final_error,
        "rapid_decay": trace.rapid_decay,
        "errors": trace.errors,
        "residual_norms": trace.residual_norms,
    })


def _cmd_sweep(args) -> None:
    values = _merge(args, _EXPERIMENT_KEYS + ["k_grid", "mode", "a", "b", "m"])
    baselines = list(args.baseline_m)
    if args.reference_grid:
        values.setdefault("k_grid", list(REFERENCE_K_GRID))
        values.update(mode="siht", a=values.get("a", 20), b=values.get("b", 150))
        baselines = baselines or list(REFERENCE_OFFLINE_M)
    config = ExperimentConfig(**values)
    output = args.output or Path(get_settings().output_dir) / "sweep.csv"
    result = ExperimentService(config.workers).run_recovery_sweep(config, output, baselines)
    _emit({"output": str(output), "rows": [row.model_dump() for row in result.rows]})


def _cmd_phase_diagram(args) -> None:
    values = _merge(args, _EXPERIMENT_KEYS + ["k", "a_values", "b_values", "range_limit"])
    config = PhaseDiagramConfig(**values)
    out_dir = Path(get_settings().output_dir)
    pgm = args.output_pgm or out_dir / "phase_diagram.pgm"
    csv_path = args.output_csv or out_dir / "phase_diagram.csv"
    result = ExperimentService(config.workers).run_phase_diagram(config, pgm, csv_path)
    _emit({
        "pgm": str(pgm),
        "csv": str(csv_path),
        "cells": [cell.model_dump() for cell in result.cells],
    })


def _cmd_complexity(args) -> None:
    payload: Dict[str, Any] = {}
    if args.m is not None:
        if args.boundaries is not None:
            breakdown = dynamic_sample_complexity(args.m, make_schedule(args.boundaries))
        elif args.p is not None:
            breakdown = breakdown_from_fractions(args.m, args.p)
        else:
            # equal durations
            breakdown = breakdown_from_fractions(args.m, [1 / len(args.m)] * len(args.m))
        payload.update(breakdown.model_dump())
        if args.k is not None and args.n is not None:
            c_tilde = args.c_tilde if args.c_tilde is not None else get_settings().c_tilde
            check = satisfies_condition(breakdown, args.k, args.n, args.epsilon, c_tilde)
            payload["condition"] = check.model_dump()
    if args.uniform_range is not None:
        if len(args.uniform_range) != 2:
            raise InvalidArgumentError("--range expects exactly a,b")
        a, b = args.uniform_range
        estimate = estimate_expected_md(a, b, args.s, args.trials, args.seed)
        payload["expected_md_lower_bound"] = expected_md_lower_bound(a, b)
        payload["expected_md"] = estimate.model_dump()
    if not payload:
        raise InvalidArgumentError("complexity needs --m and/or --range")
    _emit(payload)


def _cmd_ric(args) -> None:
    matrix = ReportService().read_matrix_csv(args.matrix)
    result = ric(matrix, args.order, cap=args.cap, workers=args.workers)
    _emit({"order": result.order, "value": result.value, "witness": list(result.witness.indices)})


COMMANDS = {
    "recover": _cmd_recover,
    "sweep": _cmd_sweep,
    "phase-diagram": _cmd_phase_diagram,
    "complexity": _cmd_complexity,
    "ric": _cmd_ric,
}


def cli_main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return EXIT_INVALID

    configure_logging(args.log_level or get_settings().log_level, sink=sys.stderr)
    logger.info(f"Running {args.command}")
    try:
        COMMANDS[args.command](args)
    except OutputError as e:
        logger.error(str(e))
        return EXIT_IO
    except (ValidationError, SihtError, ValueError) as e:
        logger.error(f"Invalid input: {e}")
        parser.print_usage(sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
