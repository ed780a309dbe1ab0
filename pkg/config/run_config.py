"""
Run configuration: a flat key=value file with dotted sections, e.g.

    name=tg16
    t_end=1.0
    flow.nu=0.1
    flow.n=16
    flow.forcing=none
    initial.kind=taylor_green
    integrator.dt=1e-3
    integrator.stride=10

Lines are read with python-dotenv and validated by the pydantic models below;
unknown keys are rejected.
"""
import os
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from config.settings import (
    BALL_RTOL,
    BUDGET_RTOL,
    CONVERGENCE_TOL,
    DEFAULT_NU,
    DEFAULT_PERIOD,
    DEFAULT_RESOLUTION,
    ESTIMATE_RTOL,
    OUTPUT_DIR,
    SHAPE_SAMPLES,
    STATIONARITY_TOL,
)
from config.logging_config import logger
from core.dynamics import (
    IntegratorConfig,
    kolmogorov_forcing,
    manufacture_forcing,
    shear_mode_steady_state,
    taylor_green_exact,
)
from core.errors import ConfigError
from core.lattice import (
    FlowParameters,
    ShapeConstants,
    SpectralField,
    WaveVectorLattice,
    l2_norm_sq,
    random_field,
    zeros,
)
from utils.helpers import atomic_write_bytes, parse_float_list
from utils.validators import validate_resolution, validate_window_schedule


def _float_list(value: Any) -> Any:
    if isinstance(value, str):
        return parse_float_list(value)
    return value


class FlowConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    nu: float = Field(DEFAULT_NU, gt=0)
    n: int = DEFAULT_RESOLUTION
    periods: List[float] = Field(default_factory=lambda: [DEFAULT_PERIOD] * 3)
    forcing: Literal["none", "shear", "kolmogorov", "random_low_mode", "manufactured"] = "none"
    forcing_amplitude: float = Field(1.0, ge=0)
    forcing_wavenumber: int = Field(1, ge=1)
    forcing_max_mode: int = Field(2, ge=1)

    @field_validator("periods", mode="before")
    @classmethod
    def _split_periods(cls, v: Any) -> Any:
        return _float_list(v)

    @field_validator("n")
    @classmethod
    def _check_resolution(cls, v: int) -> int:
        if not validate_resolution(v):
            raise ValueError("resolution must be an even integer >= 4")
        return v

    @field_validator("periods")
    @classmethod
    def _check_periods(cls, v: List[float]) -> List[float]:
        if len(v) == 1:
            v = v * 3
        if len(v) != 3 or any(p <= 0 for p in v):
            raise ValueError("periods must be one or three positive lengths")
        return v


class InitialConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["zero", "taylor_green", "random", "steady"] = "random"
    l2_norm: Optional[float] = Field(None, gt=0)
    max_mode: Optional[int] = Field(None, ge=1)
    slope: float = 0.0


class AveragingConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    windows: List[float] = Field(default_factory=lambda: [0.25, 0.5, 1.0])
    t0: Optional[float] = None
    shifts: List[float] = Field(default_factory=list)
    battery_size: int = Field(20, ge=1)
    psi_r: List[float] = Field(default_factory=lambda: [0.1, 1.0, 10.0])

    @field_validator("windows", "shifts", "psi_r", mode="before")
    @classmethod
    def _split_lists(cls, v: Any) -> Any:
        return _float_list(v)

    @field_validator("windows")
    @classmethod
    def _check_windows(cls, v: List[float]) -> List[float]:
        errors = validate_window_schedule(v)
        if errors:
            raise ValueError(errors["windows"])
        return v


class ToleranceConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    budget: float = Field(BUDGET_RTOL, gt=0)
    ball: float = Field(BALL_RTOL, ge=0)
    estimate: float = Field(ESTIMATE_RTOL, ge=0)
    stationarity: float = Field(STATIONARITY_TOL, gt=0)
    convergence: float = Field(CONVERGENCE_TOL, gt=0)
    liouville: float = Field(1e-10, gt=0)


class ConstantsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    c1: Optional[float] = Field(None, gt=0)
    c2: Optional[float] = Field(None, ge=1)
    samples: int = Field(SHAPE_SAMPLES, ge=1)
    tau_fraction: float = Field(0.25, gt=0, lt=1)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "run"
    seed: int = 0
    output_dir: str = OUTPUT_DIR
    t_start: float = 0.0
    t_end: float = 1.0
    flow: FlowConfig = Field(default_factory=FlowConfig)
    initial: InitialConfig = Field(default_factory=InitialConfig)
    integrator: IntegratorConfig = Field(default_factory=IntegratorConfig)
    averaging: AveragingConfig = Field(default_factory=AveragingConfig)
    tolerances: ToleranceConfig = Field(default_factory=ToleranceConfig)
    constants: ConstantsConfig = Field(default_factory=ConstantsConfig)

    @model_validator(mode="after")
    def _check_span(self) -> "RunConfig":
        if self.t_end < self.t_start:
            raise ValueError("t_end must not precede t_start")
        return self


def _nest(flat: Dict[str, Optional[str]]) -> Dict[str, Any]:
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        parts = key.strip().split(".")
        node = nested
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"key {key} collides with a scalar setting", fields=[key])
        if value is not None and value.strip() != "":
            node[parts[-1]] = value.strip()
    return nested


def parse_run_config(flat: Dict[str, Optional[str]]) -> RunConfig:
    """Validate flat dotted settings; errors name the offending dotted fields."""
    nested = _nest(flat)
    env_output = os.getenv("NSSTAT_OUTPUT_DIR")
    if env_output:
        nested["output_dir"] = env_output
    try:
        return RunConfig.model_validate(nested)
    except ValidationError as e:
        fields = [".".join(str(part) for part in err["loc"]) for err in e.errors()]
        messages = "; ".join(f"{f}: {err['msg']}" for f, err in zip(fields, e.errors()))
        raise ConfigError(f"invalid configuration: {messages}", fields=fields) from e


def load_run_config(path: str) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError(f"configuration file not found: {path}")
    cfg = parse_run_config(dotenv_values(path))
    logger.info(f"Loaded configuration {cfg.name} from {path}")
    return cfg


def write_run_config(cfg: RunConfig, path: str) -> None:
    """Flatten a RunConfig back into dotted key=value lines."""
    lines = []

    def _emit(prefix: str, data: Dict[str, Any]):
        for key, value in data.items():
            name = f"{prefix}{key}"
            if isinstance(value, dict):
                _emit(f"{name}.", value)
            elif value is None:
                continue
            elif isinstance(value, (list, tuple)):
                lines.append(f"{name}={','.join(repr(float(v)) for v in value)}")
            else:
                lines.append(f"{name}={value}")

    _emit("", cfg.model_dump())
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


# ---------------------------------------------------------------------------
# builders

def build_lattice(cfg: RunConfig) -> WaveVectorLattice:
    return WaveVectorLattice(cfg.flow.n, tuple(cfg.flow.periods))


def build_flow(cfg: RunConfig) -> Tuple[FlowParameters, Optional[SpectralField]]:
    """Flow parameters and, when the forcing has one by construction, its steady state."""
    lattice = build_lattice(cfg)
    flow = cfg.flow
    steady: Optional[SpectralField] = None
    if flow.forcing == "none":
        forcing = zeros(lattice)
        steady = forcing
    elif flow.forcing == "shear":
        steady, forcing = shear_mode_steady_state(lattice, flow.nu, flow.forcing_amplitude)
    elif flow.forcing == "kolmogorov":
        forcing = kolmogorov_forcing(lattice, flow.forcing_amplitude, flow.forcing_wavenumber)
        lam = (2 * np.pi * flow.forcing_wavenumber / lattice.periods[1]) ** 2
        steady = forcing / (flow.nu * lam)
    elif flow.forcing == "random_low_mode":
        rng = np.random.default_rng(cfg.seed + 1)
        forcing = random_field(lattice, rng, max_mode=min(flow.forcing_max_mode, lattice.kmax),
                               l2_norm=flow.forcing_amplitude)
    else:
        rng = np.random.default_rng(cfg.seed + 1)
        steady = random_field(lattice, rng, max_mode=min(flow.forcing_max_mode, lattice.kmax),
                              l2_norm=flow.forcing_amplitude)
        forcing = manufacture_forcing(steady, flow.nu)
    p = FlowParameters(flow.nu, forcing)
    logger.info(f"Flow: {p.summary()}")
    return p, steady


def build_initial(cfg: RunConfig, p: FlowParameters, steady: Optional[SpectralField] = None) -> SpectralField:
    lattice = p.lattice
    initial = cfg.initial
    if initial.kind == "zero":
        return zeros(lattice)
    if initial.kind == "taylor_green":
        u0 = taylor_green_exact(0.0, p.nu, lattice)
    elif initial.kind == "steady":
        if steady is None:
            raise ConfigError(f"forcing '{cfg.flow.forcing}' has no known steady state", fields=["initial.kind"])
        return steady
    else:
        rng = np.random.default_rng(cfg.seed)
        max_mode = min(initial.max_mode, lattice.kmax) if initial.max_mode else None
        u0 = random_field(lattice, rng, max_mode=max_mode, slope=initial.slope)
        if initial.l2_norm is None:
            # default start on the boundary of the absorbing ball, or unit size without forcing
            radius = p.r0 if p.r0 > 0 else 1.0
            return u0 * (radius / np.sqrt(l2_norm_sq(u0)))
    if initial.l2_norm is not None:
        u0 = u0 * (initial.l2_norm / np.sqrt(l2_norm_sq(u0)))
    return u0


def build_constants(cfg: RunConfig) -> Optional[ShapeConstants]:
    """User constants when c1 is given; None means they must be estimated."""
    if cfg.constants.c1 is None:
        return None
    return ShapeConstants(c1=cfg.constants.c1, c2=cfg.constants.c2 or 1.0, provenance="user")
