import os
from typing import Any, Dict, Optional

from config.logging_config import logger
from core.errors import ConfigError
from core.trajectory import detect_period
from core.verify import SetPredicate, recurrence_scan
from scripts.common import EXIT_OK, command, output_path, require_file, stem, write_report
from utils.helpers import load_from_json
from utils.snapshot_io import read_trajectory


@command
def cmd_recurrence(trajectory_path: str, set_path: str, horizon: Optional[float] = None,
                   min_gap: float = 0.0, output_dir: Optional[str] = None) -> int:
    """
    First-return histogram of the visits of a trajectory to a box set E.

    Without a horizon, three periods of the energy signal are used when a
    period can be detected.
    """
    traj, _ = read_trajectory(require_file(trajectory_path, "trajectory file"))
    spec = load_from_json(require_file(set_path, "set specification"))
    if not isinstance(spec, dict):
        raise ConfigError(f"set specification {set_path} is not a JSON object")
    E = SetPredicate.from_spec(spec, traj.lattice)

    period = detect_period(traj.times, traj.energies)
    if horizon is None:
        if period is None:
            raise ConfigError("no horizon given and no period detected in the energy signal", fields=["horizon"])
        horizon = 3.0 * period
        logger.info(f"Using horizon {horizon:.6g} (three detected periods)")
    if horizon <= 0 or min_gap < 0:
        raise ConfigError("horizon must be positive and min_gap nonnegative", fields=["horizon", "min_gap"])

    report = recurrence_scan(traj, E, horizon, min_gap)
    name = stem(trajectory_path)
    out = output_dir or os.path.dirname(trajectory_path) or "."
    report.to_csv(output_path(out, name, "_recurrence.csv"))
    summary: Dict[str, Any] = report.to_dict()
    summary.update({"trajectory": trajectory_path, "set": spec, "detected_period": period})
    write_report(summary, output_path(out, name, "_recurrence.json"))
    return EXIT_OK
