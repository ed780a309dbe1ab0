from typing import Any, Dict, Optional

import numpy as np

from config.logging_config import logger
from config.run_config import RunConfig, build_flow, build_initial, load_run_config, write_run_config
from core.dynamics import integrate, taylor_green_exact
from core.errors import BlowUpError
from core.lattice import FlowParameters, l2_norm_sq
from core.trajectory import Trajectory, energy_budget_audit, is_uniformly_bounded
from core.verify import FAIL, PASS
from scripts.common import EXIT_FAIL, EXIT_NUMERICAL, EXIT_OK, command, output_path, write_report
from utils.snapshot_io import write_trajectory


def taylor_green_error(traj: Trajectory, nu: float) -> float:
    """Largest relative L2 error against the exact Taylor-Green decay."""
    worst = 0.0
    for t, u in zip(traj.times, traj.states):
        exact = taylor_green_exact(float(t) - float(traj.times[0]), nu, traj.lattice)
        worst = max(worst, np.sqrt(l2_norm_sq(u - exact) / l2_norm_sq(exact)))
    return float(worst)


def _audit_mode(cfg: RunConfig) -> str:
    # only the converged midpoint scheme conserves the budget exactly
    exact = cfg.integrator.scheme == "imex_cn" and cfg.integrator.picard_max_iter > 1
    return "equality" if exact else "inequality"


def _summary(cfg: RunConfig, p: FlowParameters, traj: Trajectory) -> Dict[str, Any]:
    return {
        "name": cfg.name,
        "seed": cfg.seed,
        "flow": p.summary(),
        "integrator": cfg.integrator.model_dump(),
        "samples": len(traj),
        "interval": list(traj.interval),
        "initial_l2_sq": float(traj.energies[0]),
        "final_l2_sq": float(traj.energies[-1]),
        "max_enstrophy": float(np.max(traj.enstrophies)),
        "uniformly_bounded": is_uniformly_bounded(traj, p),
    }


@command
def cmd_simulate(config_path: str, output_dir: Optional[str] = None) -> int:
    """Integrate the configured flow and write the trajectory, its budget audit and a summary."""
    cfg = load_run_config(config_path)
    out = output_dir or cfg.output_dir
    p, steady = build_flow(cfg)
    u0 = build_initial(cfg, p, steady)

    logger.info(f"Simulating {cfg.name} on [{cfg.t_start}, {cfg.t_end}]")
    try:
        traj = integrate(u0, p, cfg.integrator, (cfg.t_start, cfg.t_end))
    except BlowUpError as e:
        if e.partial is not None:
            write_trajectory(output_path(out, f"{cfg.name}_partial", ".sntx"), e.partial, p.nu)
        write_report({"name": cfg.name, "blow_up_step": e.step, "error": str(e), "flow": p.summary()},
                     output_path(out, cfg.name, "_simulate.json"))
        return EXIT_NUMERICAL

    write_run_config(cfg, output_path(out, cfg.name, "_config.env"))
    write_trajectory(output_path(out, cfg.name, ".sntx"), traj, p.nu)
    audit = energy_budget_audit(traj, p, mode=_audit_mode(cfg), rtol=cfg.tolerances.budget)
    audit.to_csv(output_path(out, cfg.name, "_audit.csv"))

    summary = _summary(cfg, p, traj)
    summary["audit"] = dict(audit.summary(), verdict=PASS if audit.passed else FAIL)
    if cfg.initial.kind == "taylor_green" and p.forcing_norm == 0:
        summary["taylor_green_max_rel_error"] = taylor_green_error(traj, p.nu)
    if steady is not None and cfg.initial.kind == "steady":
        summary["max_l2_drift_from_steady"] = float(max(np.sqrt(l2_norm_sq(u - steady)) for u in traj.states))
    write_report(summary, output_path(out, cfg.name, "_simulate.json"))
    if not audit.passed:
        logger.error(f"{cfg.name}: energy budget audit failed at {summary['audit']['failures']} pairs")
        return EXIT_FAIL
    return EXIT_OK
