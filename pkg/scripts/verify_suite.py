import math
from typing import Any, Dict, Optional

from config.logging_config import logger
from config.run_config import RunConfig, build_constants, build_flow, load_run_config
from core.dynamics import ensemble_from_measure
from core.errors import ConfigError
from core.lattice import FlowParameters, ShapeConstants, WaveVectorLattice, estimate_shape_constants
from core.measures import EmpiricalMeasure, liouville_battery, random_test_battery
from core.trajectory import Ensemble
from core.verify import FAIL, SetPredicate, accretion_estimate, run_verification_suite, tau_condition
from scripts.common import EXIT_FAIL, EXIT_OK, command, output_path, require_file, reports_to_dict, write_report
from utils.helpers import load_from_json
from utils.snapshot_io import read_measure, read_trajectory


def load_constants(path: str) -> ShapeConstants:
    data = load_from_json(require_file(path, "constants file"))
    if not isinstance(data, dict) or "c1" not in data:
        raise ConfigError(f"constants file {path} must hold an object with c1 (and optionally c2)",
                          fields=["c1"])
    return ShapeConstants(c1=float(data["c1"]), c2=float(data.get("c2", 1.0)),
                          provenance=data.get("provenance", "user"), samples=int(data.get("samples", 0)))


def resolve_constants(cfg: RunConfig, p: FlowParameters, constants_path: Optional[str]) -> ShapeConstants:
    """Constants from a file, then from the config; estimated on the lattice when neither gives them."""
    if constants_path:
        return load_constants(constants_path)
    constants = build_constants(cfg)
    if constants is not None:
        return constants
    logger.info("No shape constants supplied; estimating them")
    return estimate_shape_constants(p.lattice, cfg.constants.samples, seed=cfg.seed)


def check_matches_flow(p: FlowParameters, lattice: WaveVectorLattice, nu: float, source: str) -> None:
    """The stored lattice and viscosity must be those of the configured flow."""
    if lattice != p.lattice:
        raise ConfigError(f"{source} lives on {lattice}, the config describes {p.lattice}",
                          fields=["flow.n", "flow.periods"])
    if math.isfinite(nu) and not math.isclose(nu, p.nu, rel_tol=1e-12):
        raise ConfigError(f"{source} was computed with nu={nu}, the config has nu={p.nu}", fields=["flow.nu"])


def load_set(path: str, p: FlowParameters) -> SetPredicate:
    spec = load_from_json(require_file(path, "set specification"))
    if not isinstance(spec, dict):
        raise ConfigError(f"set specification {path} is not a JSON object")
    return SetPredicate.from_spec(spec, p.lattice)


def _liouville(cfg: RunConfig, p: FlowParameters, measure: EmpiricalMeasure) -> Dict[str, Any]:
    tests = random_test_battery(measure.states, p, count=cfg.averaging.battery_size, seed=cfg.seed)
    rows = liouville_battery(measure, tests, p, rtol=cfg.tolerances.liouville,
                             stat_tol=cfg.tolerances.stationarity)
    failed = sum(row["verdict"] == FAIL for row in rows)
    if failed:
        logger.warning(f"Liouville battery: {failed}/{len(rows)} tests failed")
    return {"tests": rows, "failed": failed, "verdict": FAIL if failed else "PASS"}


def _accretion(cfg: RunConfig, p: FlowParameters, measure: EmpiricalMeasure, E: SetPredicate) -> Dict[str, Any]:
    step = cfg.integrator.dt * cfg.integrator.stride
    times = [step, 5 * step, 10 * step]
    ensemble = ensemble_from_measure(measure, p, cfg.integrator, (0.0, times[-1]))
    report = accretion_estimate(ensemble, E, times)
    data = report.to_dict()
    data["verdict"] = "PASS" if report.passed else FAIL
    return data


@command
def cmd_verify(config_path: str, measure_path: Optional[str] = None, trajectory_path: Optional[str] = None,
               constants_path: Optional[str] = None, set_path: Optional[str] = None,
               output_dir: Optional[str] = None) -> int:
    """Run the bound suite on a measure and/or a trajectory; exit code 3 when any check fails."""
    cfg = load_run_config(config_path)
    if measure_path is None and trajectory_path is None:
        raise ConfigError("verify needs a measure file, a trajectory file or both")
    out = output_dir or cfg.output_dir
    p, _ = build_flow(cfg)
    c = resolve_constants(cfg, p, constants_path)

    measure = trajectory = None
    if measure_path:
        measure, nu = read_measure(require_file(measure_path, "measure file"))
        check_matches_flow(p, measure.lattice, nu, f"measure {measure_path}")
    if trajectory_path:
        trajectory, nu = read_trajectory(require_file(trajectory_path, "trajectory file"))
        check_matches_flow(p, trajectory.lattice, nu, f"trajectory {trajectory_path}")

    tau_max = tau_condition(p, c)
    tau = cfg.constants.tau_fraction * tau_max if math.isfinite(tau_max) else None
    # a single run is screened as a one-member ensemble
    ensemble = Ensemble.uniform([trajectory]) if trajectory is not None and len(trajectory) > 1 else None
    radius_scale = p.r0 ** 2 if p.r0 > 0 else 1.0
    psi_radii = [r * radius_scale for r in cfg.averaging.psi_r] if measure is not None else []

    reports = run_verification_suite(
        p, c, measure=measure, trajectory=trajectory, ensemble=ensemble, tau=tau,
        psi_radii=psi_radii, ball_rtol=cfg.tolerances.ball, estimate_rtol=cfg.tolerances.estimate,
        liouville_rtol=cfg.tolerances.liouville, stat_tol=cfg.tolerances.stationarity,
    )
    result: Dict[str, Any] = {
        "name": cfg.name,
        "flow": p.summary(),
        "constants": c.to_dict(),
        "tau": tau,
        "tau_max": tau_max,
        "reports": reports_to_dict(reports),
    }
    verdicts = [r.verdict for r in reports.values()]
    if measure is not None:
        result["liouville"] = _liouville(cfg, p, measure)
        verdicts.append(result["liouville"]["verdict"])
        if set_path:
            result["accretion"] = _accretion(cfg, p, measure, load_set(set_path, p))
            verdicts.append(result["accretion"]["verdict"])
    elif set_path:
        logger.warning("Accretion needs a measure file; skipping the set predicate")

    counts = {v: sum(x == v for x in verdicts) for v in ("PASS", "FAIL", "INCONCLUSIVE")}
    result["verdicts"] = counts
    write_report(result, output_path(out, cfg.name, "_verify.json"))
    logger.info(f"Verification of {cfg.name}: {counts}")
    return EXIT_FAIL if counts["FAIL"] else EXIT_OK
