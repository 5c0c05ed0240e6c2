import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd
from loguru import logger

from core.config import ExperimentConfig, load_config
from core.experiment import SOURCES, ExperimentRunner, sequence_frame, write_table
from core.logging_config import setup_logging
from core.models import (
    CascadeMode,
    ComparisonFailure,
    Convention,
    OracleForm,
    UsageError,
    VolterraError,
)

EXIT_OK = 0
EXIT_COMPARISON = 1
EXIT_USAGE = 2


def parse_memory(text: str):
    if text == "auto":
        return "auto"
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"memory must be a nonnegative integer or 'auto', got {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"memory must be nonnegative, got {value}")
    return value


def parse_ints(text: str) -> List[int]:
    """'0,2,0,1' or '0 2 0 1'"""
    try:
        return [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of integers, got {text!r}")


def parse_floats(text: str) -> List[float]:
    try:
        return [float(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=Path("config.json"), help="JSON or YAML experiment config")
    common.add_argument("--order", type=int, default=None, help="Kernel order p (default: highest configured)")
    common.add_argument("--memory", type=parse_memory, default=None, help="Oracle memory L or 'auto'")
    common.add_argument("--seed", type=int, default=None, help="Seed of the random input generator")
    common.add_argument("--out", type=Path, default=None, help="CSV destination (default: stdout)")
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ERROR")
    common.add_argument("--log-dir", type=Path, default=None, help="Base directory of log files")
    common.add_argument("--no-file-logs", action="store_true", help="Log to the console only")
    common.add_argument("--workers", type=int, default=None, help="Threads for epsilon sweeps")

    parser = argparse.ArgumentParser(
        prog="volterra-invariance",
        description="Impulse invariant discretization of Volterra kernels and their cascade realization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-kernel", parents=[common], help="Sample one corrected kernel value")
    p.add_argument("--index", type=parse_ints, required=True, help="Lag tuple, e.g. 0,2,0,1")
    p.add_argument("--convention", choices=[c.value for c in Convention], default=Convention.REGULAR.value)

    p = sub.add_parser("simulate", parents=[common], help="Run a cascade realization")
    p.add_argument("--mode", choices=[m.value for m in CascadeMode], default=CascadeMode.CORRECTED.value)

    p = sub.add_parser("oracle", parents=[common], help="Brute-force kernel sum")
    p.add_argument("--form", choices=[f.value for f in OracleForm], default=OracleForm.REGULAR.value)

    p = sub.add_parser("compare", parents=[common], help="Compare two sequences of the same order")
    p.add_argument("--left", choices=SOURCES, default="corrected")
    p.add_argument("--right", choices=SOURCES, default="regular")
    p.add_argument("--tolerance", type=float, default=None, help="Relative tolerance override")

    p = sub.add_parser("ctsim", parents=[common], help="Continuous-time simulation and order extraction")
    p.add_argument("--epsilons", type=parse_floats, default=None, help="Input scalings, e.g. 0.25,-0.25,0.5,-0.5")

    sub.add_parser("complexity", parents=[common], help="Measured vs predicted additional multiplications")
    return parser


def _emit(df: pd.DataFrame, args, config: ExperimentConfig) -> None:
    out = args.out if args.out is not None else config.output.OUT_PATH
    text = write_table(df, out, config.output.FLOAT_FORMAT)
    if text is not None:
        sys.stdout.write(text)


def run_command(args, config: ExperimentConfig, runner: ExperimentRunner, record: dict) -> int:
    order = args.order if args.order is not None else max(config.orders)
    record["order"] = order

    if args.command == "sample-kernel":
        row = runner.sample_kernel(order, args.index, Convention(args.convention))
        record["mode"] = args.convention
        logger.info(f"v = {row['v']!r}, h = {row['h']!r}, m = {row['m']}")
        _emit(pd.DataFrame([row]), args, config)
        return EXIT_OK

    if args.command == "simulate":
        record["mode"] = args.mode
        _emit(runner.tag_seed(sequence_frame(runner.simulate(order, CascadeMode(args.mode)))), args, config)
        return EXIT_OK

    if args.command == "oracle":
        record["mode"] = args.form
        _emit(runner.tag_seed(sequence_frame(runner.oracle(order, OracleForm(args.form)))), args, config)
        return EXIT_OK

    if args.command == "compare":
        record["mode"] = f"{args.left}:{args.right}"
        report = runner.compare(order, args.left, args.right, args.tolerance, strict=False)
        record["detail"] = f"max_rel={report.max_rel_error:.3e}"
        _emit(runner.tag_seed(report.frame()), args, config)
        if not report.passed:
            raise ComparisonFailure(
                f"{args.left} vs {args.right} at order {order}: max rel error "
                f"{report.max_rel_error:.3e} exceeds {report.tolerance:.1e}"
            )
        return EXIT_OK

    if args.command == "ctsim":
        df, summary = runner.ctsim(order, args.epsilons)
        record["detail"] = json.dumps(summary)
        _emit(runner.tag_seed(df), args, config)
        return EXIT_OK

    if args.command == "complexity":
        df, ok = runner.complexity(order)
        _emit(df, args, config)
        if not ok:
            raise ComparisonFailure(f"measured operation counts disagree with the closed form at order {order}")
        return EXIT_OK

    raise UsageError(f"unknown command {args.command}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code"""
    args = build_parser().parse_args(argv)
    enable_files = not args.no_file_logs

    try:
        config = load_config(args.config)
    except (UsageError, ValueError) as e:
        setup_logging(args.log_level or "INFO", str(args.log_dir or "logs_folder"), enable_files=enable_files)
        logger.error(f"Failed to load configuration: {e}")
        return EXIT_USAGE

    setup_logging(
        args.log_level or config.LOG_LEVEL,
        str(args.log_dir or config.LOG_PATH),
        enable_files=enable_files,
    )
    if args.workers is not None:
        config = config.model_copy(update={"MAX_WORKERS": max(1, args.workers)})
    logger.info(f"Configuration loaded from {args.config}")

    record = {"command": args.command, "status": "ok"}
    code = EXIT_OK
    runner = None
    try:
        runner = ExperimentRunner(config, memory=args.memory, seed=args.seed)
        code = run_command(args, config, runner, record)
    except ComparisonFailure as e:
        logger.error(str(e))
        record.update(status="comparison_failure", detail=str(e))
        code = EXIT_COMPARISON
    except (UsageError, ValueError, FileNotFoundError) as e:
        logger.error(f"Usage error: {e}")
        record.update(status="usage_error", detail=str(e))
        code = EXIT_USAGE
    except VolterraError as e:
        logger.error(f"Run failed: {e}")
        record.update(status="error", detail=str(e))
        code = EXIT_USAGE
    finally:
        if runner is not None:
            record.update(runner.run_record())
        logger.bind(run=True, console=False).info(json.dumps(record, default=str))
    return code


if __name__ == "__main__":
    sys.exit(main())
