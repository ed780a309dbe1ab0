import os
from typing import Any, Dict

from config.logging_config import logger
from core.errors import ConfigError, CoverageError
from core.measures import moment_report
from core.trajectory import detect_period, omega_limit_estimate
from scripts.common import EXIT_OK, command, require_file
from utils.helpers import format_value, load_from_json
from utils.snapshot_io import read_measure, read_trajectory


def _print_trajectory(path: str) -> None:
    traj, nu = read_trajectory(path)
    print("\n===== Trajectory =====")
    print(f"File: {path}")
    print(f"Lattice: n={traj.lattice.n}, periods={traj.lattice.periods}")
    print(f"Viscosity: {format_value(nu)}")
    print(f"Samples: {len(traj)} on {traj.interval}")
    print(f"|u|^2: start {format_value(traj.energies[0])}, end {format_value(traj.energies[-1])}")
    print(f"Max enstrophy: {format_value(float(traj.enstrophies.max()))}")
    print(f"Provenance: {traj.provenance}")
    try:
        period = detect_period(traj.times, traj.energies)
        print(f"Energy period: {format_value(period) if period else 'none detected'}")
    except ValueError as e:
        print(f"Energy period: {str(e)}")
    try:
        clusters = omega_limit_estimate(traj)
        print("\n===== Omega-limit estimate =====")
        for cluster in clusters[:5]:
            print(f"t={format_value(cluster.time)}: frequency {format_value(cluster.frequency, 4)} "
                  f"({cluster.size} samples)")
    except CoverageError as e:
        logger.info(f"No omega-limit estimate: {str(e)}")


def _print_measure(path: str) -> None:
    measure, nu = read_measure(path)
    print("\n===== Empirical measure =====")
    print(f"File: {path}")
    print(f"Atoms: {len(measure)}")
    print(f"Viscosity: {format_value(nu)}")
    print(f"Provenance: {measure.provenance}")
    for key, value in moment_report(measure).items():
        print(f"{key}: {format_value(value)}")


def _print_json(path: str) -> None:
    data = load_from_json(path)
    if not isinstance(data, dict):
        raise ConfigError(f"{path} is not a report")
    print(f"\n===== Report {os.path.basename(path)} =====")
    reports: Dict[str, Any] = data.get("reports", {})
    for name, report in sorted(reports.items()):
        print(f"{name:<40} {report['verdict']:<13} left={format_value(report['left'])} "
              f"right={format_value(report['right'])}")
    if "liouville" in data:
        print(f"liouville: {data['liouville']['verdict']} ({data['liouville']['failed']} failed)")
    for key in ("verdicts", "audit", "averaging", "stationarity", "accretion"):
        if key in data:
            print(f"{key}: {data[key]}")
    if not reports:
        for key, value in sorted(data.items()):
            if not isinstance(value, (dict, list)):
                print(f"{key}: {value}")


@command
def cmd_report(path: str) -> int:
    """Print a human-readable summary of a trajectory, measure or JSON report."""
    require_file(path, "input file")
    if path.endswith(".sntx"):
        _print_trajectory(path)
    elif path.endswith(".snsm"):
        _print_measure(path)
    elif path.endswith(".json"):
        _print_json(path)
    else:
        raise ConfigError(f"cannot report on {path}: expected .sntx, .snsm or .json")
    return EXIT_OK
