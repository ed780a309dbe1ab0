import os
from typing import Any, Dict, List, Optional, Sequence

from config.logging_config import logger
from config.run_config import AveragingConfig, ToleranceConfig, load_run_config
from core.errors import ConfigError, CoverageError
from core.measures import (
    collapse_constant,
    moment_report,
    standard_observables,
    stationarity_diagnostic,
    time_average_measure,
)
from scripts.common import EXIT_OK, command, output_path, require_file, stem, write_report
from utils.helpers import ensure_dir, format_value, geometric_windows
from utils.snapshot_io import read_trajectory, write_measure
from utils.validators import validate_window_schedule


def measure_file_name(name: str, window: float) -> str:
    return f"{name}_T{format_value(window, 8)}.snsm"


@command
def cmd_average(trajectory_path: str, config_path: Optional[str] = None,
                windows: Optional[Sequence[float]] = None, output_dir: Optional[str] = None) -> int:
    """Build one time-average measure per window and write the averaging/stationarity diagnostics."""
    traj, nu = read_trajectory(require_file(trajectory_path, "trajectory file"))
    cfg = load_run_config(config_path) if config_path else None
    averaging = cfg.averaging if cfg is not None else AveragingConfig()
    tolerances = cfg.tolerances if cfg is not None else ToleranceConfig()
    span = float(traj.times[-1] - traj.times[0])
    if windows:
        windows = [float(w) for w in windows]
    elif cfg is not None:
        windows = list(averaging.windows)
    else:
        windows = geometric_windows(span / 8.0, span, 4)
    errors = validate_window_schedule(windows)
    if errors:
        raise ConfigError(errors["windows"], fields=["averaging.windows"])

    name = stem(trajectory_path)
    out = ensure_dir(output_dir or (cfg.output_dir if cfg is not None else os.path.dirname(trajectory_path) or "."))
    observables = standard_observables()

    measures, diagnostics = time_average_measure(traj, windows, t0=averaging.t0, observables=observables,
                                                 tol=tolerances.convergence)
    files: List[str] = []
    moments: Dict[str, Dict[str, float]] = {}
    for window, measure in zip(windows, measures):
        # a steady trajectory averages to a Dirac mass
        measure = collapse_constant(measure)
        path = os.path.join(out, measure_file_name(name, window))
        write_measure(path, measure, nu)
        files.append(path)
        moments[format_value(window, 8)] = moment_report(measure)

    shifts = list(averaging.shifts) or [span / 4.0]
    report: Dict[str, Any] = {
        "trajectory": trajectory_path,
        "measures": files,
        "averaging": diagnostics.to_dict(),
        "moments": moments,
    }
    try:
        stationarity = stationarity_diagnostic(traj, observables, shifts, tol=tolerances.stationarity)
        report["stationarity"] = stationarity.to_dict()
    except CoverageError as e:
        logger.warning(f"Skipping stationarity diagnostic: {str(e)}")
        report["stationarity"] = None
    write_report(report, output_path(out, name, "_average.json"))
    return EXIT_OK
