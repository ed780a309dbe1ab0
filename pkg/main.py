import argparse
import sys

from config.logging_config import logger, setup_logging
from scripts.average import cmd_average
from scripts.common import EXIT_USAGE
from scripts.constants import cmd_estimate_constants
from scripts.recurrence import cmd_recurrence
from scripts.report import cmd_report
from scripts.simulate import cmd_simulate
from scripts.verify_suite import cmd_verify
from utils.helpers import parse_float_list


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Galerkin Navier-Stokes simulations and statistical-solution diagnostics")
    parser.add_argument("--log-level", help="Logging level (default from NSSTAT_LOG_LEVEL)")
    parser.add_argument("--output-dir", help="Output directory (overrides the config and NSSTAT_OUTPUT_DIR)")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="Integrate a configured flow")
    simulate.add_argument("config", help="Run configuration file")

    average = sub.add_parser("average", help="Time-average measures from a trajectory")
    average.add_argument("trajectory", help="Trajectory file (.sntx)")
    average.add_argument("--config", help="Run configuration for the averaging schedule")
    average.add_argument("--windows", type=parse_float_list, help="Comma-separated window lengths")

    verify = sub.add_parser("verify", help="Run the bound suite")
    verify.add_argument("config", help="Run configuration file (flow and tolerances)")
    verify.add_argument("--measure", help="Measure file (.snsm)")
    verify.add_argument("--trajectory", help="Trajectory file (.sntx)")
    verify.add_argument("--constants", help="Shape constants JSON")
    verify.add_argument("--set", dest="set_path", help="Set predicate JSON for the accretion check")

    recurrence = sub.add_parser("recurrence", help="First-return statistics for a set")
    recurrence.add_argument("trajectory", help="Trajectory file (.sntx)")
    recurrence.add_argument("set_path", metavar="set", help="Set predicate JSON")
    recurrence.add_argument("--horizon", type=float, help="Return horizon (default: three detected periods)")
    recurrence.add_argument("--min-gap", type=float, default=0.0, help="Shortest counted return time")

    constants = sub.add_parser("estimate-constants", help="Estimate the shape constants c1 and c2")
    constants.add_argument("--config", help="Run configuration file")
    constants.add_argument("--n", type=int, help="Lattice resolution")
    constants.add_argument("--samples", type=int, help="Number of sample fields")
    constants.add_argument("--seed", type=int, help="Random seed")

    report = sub.add_parser("report", help="Summarize a trajectory, measure or JSON report")
    report.add_argument("path", help="File to summarize")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else 0

    setup_logging(level=args.log_level)
    logger.info(f"Running {args.command}")
    out = args.output_dir

    if args.command == "simulate":
        return cmd_simulate(args.config, output_dir=out)
    if args.command == "average":
        return cmd_average(args.trajectory, args.config, args.windows, output_dir=out)
    if args.command == "verify":
        return cmd_verify(args.config, measure_path=args.measure, trajectory_path=args.trajectory,
                          constants_path=args.constants, set_path=args.set_path, output_dir=out)
    if args.command == "recurrence":
        return cmd_recurrence(args.trajectory, args.set_path, args.horizon, args.min_gap, output_dir=out)
    if args.command == "estimate-constants":
        return cmd_estimate_constants(args.config, args.n, args.samples, args.seed, output_dir=out)
    return cmd_report(args.path)


def main():
    """Main entry point with command line arguments."""
    sys.exit(run())


if __name__ == "__main__":
    main()
