"""
Confluent SUSY Toolkit - Command Line
confluent-susy transform|verify|spectrum|scan --config <path> [overrides]
"""

import argparse
import json
import logging
import sys
from typing import List, Optional

from .config import load_config
from .errors import (
    BlowUpError,
    ConfigError,
    ConfluentSUSYError,
    DomainError,
    NotSquareIntegrableError,
    NumericalAccuracyError,
    PreconditionError,
    SingularityError,
    UnsupportedError,
)
from .pipeline import ConfluentTransformPipeline

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SINGULAR = 2
EXIT_VERIFICATION = 3

COMMANDS = ("transform", "verify", "spectrum", "scan")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="confluent-susy",
        description="Confluent SUSY transformations of 1-D Schrödinger potentials",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub = subparsers.add_parser(name)
        sub.add_argument("--config", help="TOML run configuration")
        sub.add_argument("--lambda", dest="lambda_", type=float, help="Factorization energy")
        sub.add_argument("--order", type=int, help="Transformation order n")
        sub.add_argument("--constants", help="Comma-separated tower constants, numbers or 'auto'")
        sub.add_argument("--grid", help="x_min,x_max,n_points")
        sub.add_argument("--out", help="Output directory (overrides CONFLUENT_SUSY_OUT)")
        sub.add_argument("--force", action="store_true", help="Emit outputs even for a singular Wronskian")
        sub.add_argument("--residual-tol", type=float, help="Override every verification tolerance")
        sub.add_argument("--verbose", action="store_true", help="DEBUG logging")
        sub.add_argument("--log-file", help="Also log to this file")
        if name == "spectrum":
            sub.add_argument("--count", type=int, help="Number of eigenvalues")
            sub.add_argument("--base", action="store_true", help="Spectrum of the initial potential V0")
    return parser


def setup_logging(verbose: bool = False, log_file: Optional[str] = None) -> None:
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def _overrides(args: argparse.Namespace) -> dict:
    return {
        "lambda": args.lambda_,
        "order": args.order,
        "constants": args.constants,
        "grid": args.grid,
        "out": args.out,
        "force": args.force,
        "count": getattr(args, "count", None),
        "residual_tol": args.residual_tol,
    }


def cmd_transform(pipeline: ConfluentTransformPipeline) -> int:
    result = pipeline.run_transform()
    out = pipeline.write_outputs()
    status = "regular" if result.regularity.is_regular else "SINGULAR (forced)"
    print(f"Order-{result.order} transformation at lambda={pipeline.lambda_:g}: {status}; outputs in {out}")
    return EXIT_OK


def cmd_verify(pipeline: ConfluentTransformPipeline) -> int:
    verification = pipeline.run_verify()
    pipeline.write_outputs()
    for check in verification["checks"]:
        mark = "ok  " if check["passed"] else "FAIL"
        value = "-" if check["value"] is None else f"{check['value']:.3e}"
        print(f"[{mark}] {check['name']:<28} {value:>12}  ({check['kind']})")
    return EXIT_OK if verification["passed"] else EXIT_VERIFICATION


def cmd_spectrum(pipeline: ConfluentTransformPipeline, count: Optional[int], base: bool) -> int:
    report = pipeline.run_spectrum(count, base=base)
    frame = report.to_frame()
    pipeline.write_outputs({"spectrum": frame})
    print(frame.to_string(index=False, float_format=lambda v: f"{v:.6f}"))
    return EXIT_OK


def cmd_scan(pipeline: ConfluentTransformPipeline) -> int:
    report = pipeline.run_scan()
    pipeline.write_outputs()
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK if report.is_regular else EXIT_SINGULAR


def main(argv: Optional[List[str]] = None) -> int:
    """
    Command-line entry point

    Args:
        argv: Arguments (defaults to sys.argv[1:])

    Returns:
        Exit code: 0 ok, 1 configuration, 2 singular Wronskian, 3 verification failure
    """
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose, args.log_file)

    try:
        config = load_config(args.config, _overrides(args))
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG

    pipeline = ConfluentTransformPipeline(config)
    try:
        if args.command == "transform":
            return cmd_transform(pipeline)
        if args.command == "verify":
            return cmd_verify(pipeline)
        if args.command == "spectrum":
            return cmd_spectrum(pipeline, args.count, args.base)
        return cmd_scan(pipeline)
    except SingularityError as e:
        logger.error(f"Singular transformation: {e}")
        pipeline.write_outputs()
        return EXIT_SINGULAR
    except (ConfigError, DomainError, PreconditionError, UnsupportedError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except (NumericalAccuracyError, BlowUpError, NotSquareIntegrableError) as e:
        logger.error(f"Verification failure: {e}")
        return EXIT_VERIFICATION
    except ConfluentSUSYError as e:
        logger.error(f"Run failed: {e}")
        return EXIT_VERIFICATION


if __name__ == "__main__":
    sys.exit(main())
