"""Command-line interface for routh-dirac."""

import argparse
import sys
from typing import List, Optional

import numpy as np

from .checks import run_checks
from .config import RUN_MODES, RunConfig, resolve_system
from .errors import RouthDiracError
from .logging_config import setup_logging
from .parser import parse_key_value_pairs
from .simulation import DIRAC_FILE_TOL, SimulationRunner, check_trajectory_file
from .sweep import SweepExecutor, parse_grid
from .systems import FAMILIES, default_mu
from .trajectory import write_summary


def _add_system_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--system",
        required=True,
        help=f"Built-in system ({', '.join(FAMILIES)}) or path to a YAML system config file",
    )
    parser.add_argument(
        "--mu",
        type=float,
        nargs="+",
        help="Momentum level (one value per symmetry direction; default: config file or initial data)",
    )
    parser.add_argument(
        "--param",
        action="append",
        help="Family parameter override. Format: key=value, key=1.5 or key=1,2. Can be repeated.",
    )


def _add_run_arguments(parser: argparse.ArgumentParser, default_mode: str = "full") -> None:
    parser.add_argument(
        "--mode",
        choices=RUN_MODES,
        default=default_mode,
        help=f"Equations to integrate (default: {default_mode})",
    )
    parser.add_argument("--h", type=float, default=1e-3, help="Step size (default: 1e-3)")
    parser.add_argument("--T", type=float, default=1.0, help="Final time (default: 1.0)")
    parser.add_argument(
        "--newton-tol", type=float, default=1e-10, help="Newton residual tolerance (default: 1e-10)"
    )
    parser.add_argument(
        "--max-iters", type=int, default=50, help="Newton iterations per step (default: 50)"
    )
    parser.add_argument("--seed", type=int, default=0, help="Seed for random sampling (default: 0)")


def parse_args(argv: Optional[List[str]] = None):
    """Parse command line arguments"""
    common = argparse.ArgumentParser(add_help=False)
    # SUPPRESS keeps a --verbose given before the subcommand
    common.add_argument(
        "--verbose", action="store_true", default=argparse.SUPPRESS, help="Enable verbose output"
    )

    parser = argparse.ArgumentParser(
        prog="routh-dirac",
        description="Implicit Lagrange-Routh and Routh-Dirac simulator for systems with symmetry",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s simulate --system cyclic-linear --mu 1 --h 1e-3 --T 1 --out run.csv
  %(prog)s simulate --system cyclic-linear --mu 1 --mode both --summary summary.json
  %(prog)s simulate --system central-force --mu 1 --mode classical --T 5
  %(prog)s simulate --system scalar_fields.yaml --out fields.csv --check-dirac

  # Property suites:
  %(prog)s check --system scalar-fields --seed 7
  %(prog)s check --system so3 --param mu=0,0,1

  # Parameter sweeps (one summary row per value):
  %(prog)s sweep --system central-force --parameter h --values 1e-2,5e-3,2.5e-3 --T 1
  %(prog)s sweep --system scalar-fields --parameter m2 --values 0.5:2:4 --workers 4 --out fields_{index}.csv

  # Re-check a written trajectory:
  %(prog)s check-dirac --system cyclic-linear --mu 1 --trajectory run.csv

Built-in systems:
  cyclic-linear, central-force, scalar-fields, vortices, affine, so3
        """,
    )
    parser.add_argument("--verbose", action="store_true", help="Enable verbose output")

    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    simulate = subparsers.add_parser(
        "simulate", parents=[common], help="Integrate a system and write the trajectory"
    )
    _add_system_arguments(simulate)
    _add_run_arguments(simulate)
    simulate.add_argument("--out", help="Trajectory CSV path")
    simulate.add_argument("--summary", help="Summary JSON path")
    simulate.add_argument(
        "--check-dirac",
        action="store_true",
        help="Re-read the written trajectory and evaluate the Dirac residual at every step",
    )

    check = subparsers.add_parser("check", parents=[common], help="Run the property suites")
    _add_system_arguments(check)
    check.add_argument("--seed", type=int, default=0, help="Seed for random sampling (default: 0)")
    check.add_argument(
        "--points", type=int, default=200, help="Random points per identity suite (default: 200)"
    )

    sweep = subparsers.add_parser(
        "sweep", parents=[common], help="Run one simulation per value of a scalar parameter"
    )
    _add_system_arguments(sweep)
    _add_run_arguments(sweep)
    sweep.add_argument(
        "--parameter",
        required=True,
        help="Parameter to vary: h, T, newton_tol, mu (k=1 systems) or a family parameter",
    )
    sweep.add_argument(
        "--values", required=True, help="Grid as start:stop:count or a comma-separated list"
    )
    sweep.add_argument("--workers", type=int, default=1, help="Concurrent runs (default: 1)")
    sweep.add_argument(
        "--out", help="Trajectory CSV path template; {index} is replaced by the grid index"
    )
    sweep.add_argument("--summary", help="Summary JSON path (array of rows ordered by index)")

    check_dirac = subparsers.add_parser(
        "check-dirac", parents=[common], help="Evaluate the Dirac residual along a trajectory file"
    )
    _add_system_arguments(check_dirac)
    check_dirac.add_argument("--trajectory", required=True, help="Trajectory CSV in natural layout")
    check_dirac.add_argument(
        "--tolerance",
        type=float,
        default=DIRAC_FILE_TOL,
        help=f"Largest accepted residual (default: {DIRAC_FILE_TOL:g})",
    )

    return parser.parse_args(argv)


def _run_config(args) -> RunConfig:
    return RunConfig(
        system=args.system,
        mu=args.mu,
        mode=args.mode,
        h=args.h,
        T=args.T,
        out=args.out,
        summary=args.summary,
        seed=args.seed,
        check_dirac=getattr(args, "check_dirac", False),
        newton_tol=args.newton_tol,
        max_iters=args.max_iters,
        params=parse_key_value_pairs(args.param),
    )


def cmd_simulate(args, logger) -> bool:
    outcome = SimulationRunner().run(_run_config(args))
    summary = outcome.summary
    logger.info("Summary:")
    for key in ("max_momentum_drift", "max_energy_drift", "max_dirac_residual", "full_reduced_gap"):
        if key in summary:
            logger.info(f"  {key}: {summary[key]:.3e}")
    logger.info(f"  rank_defects: {summary['rank_defects']}")
    return outcome.verified


def cmd_check(args, logger) -> bool:
    resolved = resolve_system(args.system, parse_key_value_pairs(args.param))
    mu = args.mu if args.mu is not None else resolved.mu
    results = run_checks(resolved.system, mu=mu, seed=args.seed, points=args.points)
    for result in results:
        print(result)
    passed = sum(1 for r in results if r.passed)
    logger.info(f"{passed}/{len(results)} checks passed for {resolved.system.label}")
    return passed == len(results)


def cmd_sweep(args, logger) -> bool:
    values = parse_grid(args.values)
    executor = SweepExecutor(_run_config(args), args.parameter, values, workers=args.workers)
    rows = executor.execute()
    if args.summary:
        write_summary(args.summary, rows)
        logger.info(f"Wrote sweep summary to {args.summary}")
    return executor.success


def cmd_check_dirac(args, logger) -> bool:
    resolved = resolve_system(args.system, parse_key_value_pairs(args.param))
    system = resolved.system
    if args.mu is not None:
        mu = np.asarray(args.mu, dtype=float)
    elif resolved.mu is not None:
        mu = resolved.mu
    else:
        mu = default_mu(system)
    residual = check_trajectory_file(system, mu, args.trajectory)
    worst = float(np.max(residual)) if residual.size else 0.0
    if worst > args.tolerance:
        step = int(np.argmax(residual))
        logger.error(f"Dirac residual {worst:.3e} at step {step} exceeds {args.tolerance:g}")
        return False
    logger.info(f"Dirac residual along {args.trajectory}: {worst:.3e} over {len(residual)} steps")
    return True


COMMANDS = {
    "simulate": cmd_simulate,
    "check": cmd_check,
    "sweep": cmd_sweep,
    "check-dirac": cmd_check_dirac,
}


def main(argv: Optional[List[str]] = None):
    # Parse command line arguments
    args = parse_args(argv)

    # Setup logging based on verbose flag
    logger = setup_logging(verbose=args.verbose)

    logger.info(f"routh-dirac {args.command}")

    try:
        success = COMMANDS[args.command](args, logger)
    except RouthDiracError as e:
        logger.error(f"{e.__class__.__name__}: {e}")
        sys.exit(1)
    except (ValueError, FileNotFoundError) as e:
        logger.error(f"{args.command} failed: {e}")
        sys.exit(1)

    if success:
        logger.info("Verification passed")
    else:
        logger.error("Verification failed")
        sys.exit(1)


if __name__ == "__main__":
    main()
