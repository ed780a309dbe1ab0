"""
Galerkin evolution du/dt = F(u) = f - nu A u - B(u, u) on the active set.

The default scheme is Crank-Nicolson on the Stokes term with the nonlinear
term evaluated at the step midpoint by fixed-point (Picard) sweeps. At
convergence the scheme is the implicit midpoint rule, whose discrete energy
budget matches d/dt |u|^2/2 + nu ||u||^2 = (f, u) exactly because
b(u, u, u) = 0 on the dealiased space.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import TYPE_CHECKING, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from config.settings import PICARD_MAX_ITER, PICARD_TOL, THREADS, TIME_RTOL
from config.logging_config import logger
from core.errors import BlowUpError, LatticeError
from core.lattice import (
    FlowParameters,
    SpectralField,
    WaveVectorLattice,
    _check_same,
    bilinear_B,
    h1_norm_sq,
    inner,
    leray_project,
    physical_to_coeffs,
    single_mode,
    stokes_apply,
)
from core.trajectory import Ensemble, Trajectory

if TYPE_CHECKING:
    from core.measures import EmpiricalMeasure

# classical RK4 stage weights and substep fractions
RK4_A = (1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0)
RK4_B = (0.5, 0.5, 1.0)


class IntegratorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    dt: float = Field(1e-3, gt=0)
    scheme: Literal["imex_cn", "rk4"] = "imex_cn"
    stride: int = Field(1, ge=1)
    max_steps: Optional[int] = Field(None, ge=0)
    picard_max_iter: int = Field(PICARD_MAX_ITER, ge=1)
    picard_tol: float = Field(PICARD_TOL, gt=0)


def rhs_F(u: SpectralField, p: FlowParameters) -> SpectralField:
    """F(u) = f - nu A u - B(u, u)."""
    _check_same(u.lattice, p.lattice)
    return p.forcing - p.nu * stokes_apply(u) - bilinear_B(u, u)


def _check_finite(coeffs: np.ndarray, step_index: int) -> None:
    if not np.all(np.isfinite(coeffs)):
        raise BlowUpError(step_index)


def _cn_step(u: SpectralField, p: FlowParameters, cfg: IntegratorConfig,
             step_index: int) -> Tuple[SpectralField, SpectralField]:
    """One Crank-Nicolson/Picard step; returns (u_next, midpoint state)."""
    lattice = u.lattice
    half = 0.5 * p.nu * cfg.dt * lattice.eigenvalues
    explicit = (1.0 - half) * u.coeffs + cfg.dt * p.forcing.coeffs
    denom = 1.0 + half

    nonlinear = bilinear_B(u, u).coeffs
    nxt = (explicit - cfg.dt * nonlinear) / denom
    _check_finite(nxt, step_index)
    for sweep in range(1, cfg.picard_max_iter):
        mid = SpectralField(lattice, 0.5 * (u.coeffs + nxt))
        new = (explicit - cfg.dt * bilinear_B(mid, mid).coeffs) / denom
        _check_finite(new, step_index)
        change = float(np.max(np.abs(new - nxt)))
        nxt = new
        if change <= cfg.picard_tol * max(1.0, float(np.max(np.abs(new)))):
            break
    else:
        if cfg.picard_max_iter > 1:
            logger.warning(f"Picard sweeps did not converge at step {step_index} (last change {change:.3e})")
    u_next = SpectralField(lattice, nxt)
    return u_next, SpectralField(lattice, 0.5 * (u.coeffs + nxt))


def _rk4_step(u: SpectralField, p: FlowParameters, cfg: IntegratorConfig,
              step_index: int) -> Tuple[SpectralField, SpectralField]:
    u0 = u.coeffs
    u1 = u0.copy()
    stage = u
    for rk in range(4):
        dU = rhs_F(stage, p).coeffs
        _check_finite(dU, step_index)
        if rk < 3:
            stage = SpectralField(u.lattice, u0 + RK4_B[rk] * cfg.dt * dU)
        u1 = u1 + RK4_A[rk] * cfg.dt * dU
    _check_finite(u1, step_index)
    u_next = SpectralField(u.lattice, u1)
    return u_next, SpectralField(u.lattice, 0.5 * (u0 + u1))


def _advance(u, p, cfg, step_index):
    if cfg.scheme == "rk4":
        return _rk4_step(u, p, cfg, step_index)
    return _cn_step(u, p, cfg, step_index)


def step(u: SpectralField, p: FlowParameters, cfg: IntegratorConfig, step_index: int = 0) -> SpectralField:
    """Advance one time step of size cfg.dt."""
    _check_same(u.lattice, p.lattice)
    u_next, _ = _advance(u, p, cfg, step_index)
    return u_next


def _step_count(t_span: Tuple[float, float], cfg: IntegratorConfig) -> int:
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 >= t0:
        raise ValueError(f"empty time span {t_span}")
    span = t1 - t0
    n_steps = int(round(span / cfg.dt))
    if abs(n_steps * cfg.dt - span) > TIME_RTOL * max(1.0, span) + 1e-12:
        logger.warning(f"time span {span} is not a multiple of dt={cfg.dt}; using {n_steps} steps")
    if n_steps % cfg.stride:
        n_steps -= n_steps % cfg.stride
        logger.warning(f"truncating to {n_steps} steps so the last sample falls on the stride")
    if cfg.max_steps is not None and n_steps > cfg.max_steps:
        n_steps = cfg.max_steps - cfg.max_steps % cfg.stride
        logger.warning(f"capping integration at max_steps ({n_steps} steps)")
    return n_steps


def integrate(u0: SpectralField, p: FlowParameters, cfg: IntegratorConfig,
              t_span: Tuple[float, float]) -> Trajectory:
    """
    Integrate from u0 over t_span, sampling every ``cfg.stride`` steps.

    The running integrals nu*int ||u||^2 and int (f, u) are accumulated with
    the scheme's own midpoint quadrature and stored on the trajectory for the
    energy-budget audit.
    """
    _check_same(u0.lattice, p.lattice)
    t0 = float(t_span[0])
    n_steps = _step_count(t_span, cfg)
    provenance = {"scheme": cfg.scheme, "dt": cfg.dt, "stride": cfg.stride, "nu": p.nu}

    times, states = [t0], [u0]
    cum_d, cum_w = [0.0], [0.0]
    dissipation = work = 0.0
    u = u0
    report_every = max(1, n_steps // 10)
    logger.info(f"Integrating {n_steps} steps of dt={cfg.dt} with {cfg.scheme}")

    def _partial() -> Trajectory:
        return Trajectory(np.array(times), tuple(states), provenance=dict(provenance, partial=True),
                          cum_dissipation=np.array(cum_d), cum_work=np.array(cum_w))

    for n in range(1, n_steps + 1):
        try:
            u, mid = _advance(u, p, cfg, n)
        except BlowUpError as e:
            logger.error(f"Blow-up at step {n} (t={t0 + n * cfg.dt:.6g})")
            raise BlowUpError(n, str(e), partial=_partial()) from e
        dissipation += cfg.dt * p.nu * h1_norm_sq(mid)
        work += cfg.dt * inner(p.forcing, mid)
        if n % cfg.stride == 0:
            times.append(t0 + n * cfg.dt)
            states.append(u)
            cum_d.append(dissipation)
            cum_w.append(work)
        if n % report_every == 0:
            logger.info(f"step {n}/{n_steps} ({100 * n // n_steps}%)")

    return Trajectory(
        times=np.array(times),
        states=tuple(states),
        interval=(t0, t0 + n_steps * cfg.dt),
        provenance=provenance,
        cum_dissipation=np.array(cum_d),
        cum_work=np.array(cum_w),
    )


def integrate_ensemble(states: Sequence[SpectralField], p: FlowParameters, cfg: IntegratorConfig,
                       t_span: Tuple[float, float], workers: Optional[int] = None) -> List[Trajectory]:
    """Integrate every initial state; members run concurrently and keep input order."""
    workers = workers or THREADS
    if workers <= 1 or len(states) <= 1:
        return [integrate(u, p, cfg, t_span) for u in states]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda u: integrate(u, p, cfg, t_span), states))


def ensemble_from_measure(measure: "EmpiricalMeasure", p: FlowParameters, cfg: IntegratorConfig,
                          t_span: Tuple[float, float], workers: Optional[int] = None) -> Ensemble:
    """Flow every atom of a measure forward, keeping its weight."""
    members = integrate_ensemble(measure.states, p, cfg, t_span, workers)
    return Ensemble(measure.weights, tuple(members))


# ---------------------------------------------------------------------------
# oracles

def manufacture_forcing(u_star: SpectralField, nu: float) -> SpectralField:
    """f = nu A u* + B(u*, u*), so that F(u*) = 0."""
    return nu * stokes_apply(u_star) + bilinear_B(u_star, u_star)


def _is_2pi_cube(lattice: WaveVectorLattice) -> bool:
    return bool(np.allclose(lattice.periods, 2 * np.pi, rtol=1e-12, atol=0.0))


def taylor_green_exact(t: float, nu: float, lattice: WaveVectorLattice) -> SpectralField:
    """exp(-2 nu t) (sin x1 cos x2, -cos x1 sin x2, 0)."""
    if not _is_2pi_cube(lattice):
        raise LatticeError(f"the Taylor-Green oracle needs a 2*pi box, got periods {lattice.periods}")
    x, y, _ = lattice.grid
    amplitude = np.exp(-2.0 * nu * t)
    values = np.stack([
        amplitude * np.sin(x) * np.cos(y),
        -amplitude * np.cos(x) * np.sin(y),
        np.zeros_like(x),
    ])
    return leray_project(lattice, physical_to_coeffs(lattice, values))


def _largest_axis(lattice: WaveVectorLattice) -> int:
    return int(np.argmax(lattice.periods))


def shear_mode(lattice: WaveVectorLattice, amplitude: float = 1.0) -> SpectralField:
    """amplitude * cos(K x_j) e_i on the lowest mode along the longest axis j."""
    j = _largest_axis(lattice)
    i = (j + 1) % 3
    k = [0, 0, 0]
    k[j] = 1
    direction = np.zeros(3, dtype=np.complex128)
    direction[i] = 0.5 * amplitude
    return single_mode(lattice, k, direction)


def shear_mode_steady_state(lattice: WaveVectorLattice, nu: float,
                            amplitude: float = 1.0) -> Tuple[SpectralField, SpectralField]:
    """(u*, f) with u* a lambda_1 shear mode and f = nu lambda_1 u*, a steady solution."""
    u_star = shear_mode(lattice, amplitude)
    return u_star, manufacture_forcing(u_star, nu)


def kolmogorov_forcing(lattice: WaveVectorLattice, amplitude: float = 1.0, wavenumber: int = 1) -> SpectralField:
    """amplitude * sin(k x_2) e_1."""
    k = (0, int(wavenumber), 0)
    direction = np.array([-0.5j * amplitude, 0.0, 0.0])
    return single_mode(lattice, k, direction)
