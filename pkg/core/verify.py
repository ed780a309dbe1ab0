"""
Verifiers for the explicit inequalities satisfied by weak solutions and
stationary statistical solutions, plus accretion and recurrence statistics.

Every bound is reported as a BoundReport whose verdict depends only on the
left value, the right value and the tolerances. Constant-dependent bounds
also report the critical constant, the smallest value for which they would
hold.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.spatial import cKDTree
from scipy.stats import norm as normal_dist

from config.settings import (
    BALL_RTOL,
    BOUND_ATOL,
    BOUND_RTOL,
    ESTIMATE_RTOL,
    THREADS,
    TIME_RTOL,
    WILSON_CONFIDENCE,
)
from config.logging_config import logger
from core.errors import CoverageError, TauConditionError
from core.lattice import (
    FlowParameters,
    ShapeConstants,
    SpectralField,
    WaveVectorLattice,
    da_norm_sq,
    h1_norm_sq,
    l2_norm_sq,
    linf_norm,
)
from core.measures import (
    EmpiricalMeasure,
    Observable,
    PsiFunction,
    boundary_allowance,
    energy_observable,
    enstrophy_observable,
    expect,
    energy_inequality_residual,
    energy_inequality_scale,
    mode_observable,
)
from core.trajectory import Ensemble, Trajectory, sample_at, weak_features
from utils.helpers import save_to_csv
from utils.validators import validate_set_spec

Source = Union[Trajectory, EmpiricalMeasure]

PASS = "PASS"
FAIL = "FAIL"
INCONCLUSIVE = "INCONCLUSIVE"


def verdict_for(left: float, right: float, rtol: float = BOUND_RTOL, atol: float = BOUND_ATOL) -> str:
    """PASS iff left <= right (1 + rtol) + atol; INCONCLUSIVE when the bound is vacuous or undefined."""
    if np.isnan(left) or np.isnan(right) or np.isinf(right):
        return INCONCLUSIVE
    return PASS if left <= right + rtol * abs(right) + atol else FAIL


@dataclass
class BoundReport:
    bound_id: str
    left: float
    right: float
    constants: Dict[str, Any] = field(default_factory=dict)
    finite_t_factor: float = 1.0
    verdict: str = INCONCLUSIVE
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bound_id": self.bound_id,
            "left": self.left,
            "right": self.right,
            "constants": self.constants,
            "finite_t_factor": self.finite_t_factor,
            "verdict": self.verdict,
            "details": self.details,
        }


def _report(bound_id: str, left: float, right: float, constants: Optional[Dict[str, Any]] = None,
            factor: float = 1.0, details: Optional[Dict[str, Any]] = None,
            rtol: float = BOUND_RTOL, atol: float = BOUND_ATOL,
            unmet: Optional[str] = None) -> BoundReport:
    verdict = verdict_for(left, right, rtol, atol)
    details = dict(details or {})
    if unmet is not None:
        verdict = INCONCLUSIVE
        details["unmet_hypothesis"] = unmet
    report = BoundReport(bound_id, float(left), float(right), constants or {}, float(factor), verdict, details)
    log = logger.warning if verdict == FAIL else logger.info
    log(f"{bound_id}: {verdict} (left={left:.6g}, right={right:.6g})")
    return report


def _time_average(traj: Trajectory, values: np.ndarray) -> Tuple[float, float, float]:
    """(average, integral, length) of sampled values by the trapezoid rule."""
    length = float(traj.times[-1] - traj.times[0])
    if length <= 0:
        raise CoverageError("time averages need a trajectory with positive span")
    integral = float(trapezoid(values, traj.times))
    return integral / length, integral, length


def _constants(c: Optional[ShapeConstants]) -> Dict[str, Any]:
    return c.to_dict() if c is not None else {}


def _start_outside_ball(traj: Trajectory, p: FlowParameters) -> Optional[str]:
    """The finite-window forms assume the run starts inside the absorbing ball B_H(R0)."""
    start = float(traj.energies[0])
    if start > p.r0 ** 2 * (1.0 + BALL_RTOL) + BOUND_ATOL:
        return f"initial |u|^2={start:.6g} exceeds R0^2={p.r0 ** 2:.6g}"
    return None


# ---------------------------------------------------------------------------
# moment bounds

def check_time_avg_enstrophy(source: Source, p: FlowParameters) -> BoundReport:
    """Average of ||u||^2 against lambda_1^(1/2) nu^2 G^2 (times 1 + 1/(nu lambda_1 T) for trajectories)."""
    base = p.lambda_1 ** 0.5 * p.nu ** 2 * p.grashof ** 2
    details: Dict[str, Any] = {"base_bound": base}
    if isinstance(source, Trajectory):
        left, _, length = _time_average(source, source.enstrophies)
        unmet = _start_outside_ball(source, p)
        factor = 1.0 + 1.0 / (p.nu * p.lambda_1 * length)
        details.update({
            "mode": "trajectory",
            "window": length,
            "initial_l2_sq": float(source.energies[0]),
            "bound_from_initial_state": base + float(source.energies[0]) / (p.nu * length),
        })
    else:
        unmet = None
        left = expect(source, h1_norm_sq)
        factor = 1.0
        details["mode"] = "measure"
    return _report("time_avg_enstrophy", left, base * factor, factor=factor, details=details, unmet=unmet)


def da_average_bound(p: FlowParameters, c: ShapeConstants, window: Optional[float] = None) -> float:
    """Right side of the |Au|^(2/3) average bound; stationary form when window is None."""
    core = c.c3 * p.lambda_1 ** 0.5 * p.nu ** (2.0 / 3.0) * p.grashof ** 2
    if window is None:
        return core
    if p.grashof == 0:
        return float("inf")
    singular = 1.0 / (3.0 * p.nu ** (1.0 / 3.0) * p.lambda_1 ** 0.5 * p.grashof ** (2.0 / 3.0) * window)
    return singular + core * (1.0 + 1.0 / (2.0 * p.nu * p.lambda_1 * window))


def da_integral_bound(p: FlowParameters, c: ShapeConstants, length: float, enstrophy_integral: float) -> float:
    """nu/(3|f|^(2/3)) + (c3/nu^(4/3)) (nu^(2/3)|f|^(2/3)(t - t') + int ||u||^2); +inf when f = 0."""
    f_norm = p.forcing_norm
    if f_norm == 0:
        return float("inf")
    return (p.nu / (3.0 * f_norm ** (2.0 / 3.0))
            + c.c3 / p.nu ** (4.0 / 3.0) * (p.nu ** (2.0 / 3.0) * f_norm ** (2.0 / 3.0) * length + enstrophy_integral))


def regular_interval_bound(p: FlowParameters, c: ShapeConstants, length: float,
                           enstrophy_integral: float, end_enstrophy: float) -> float:
    """nu^(5/3) / (3 y(beta)) + (c3/nu^(4/3)) int y, with y = (nu|f|)^(2/3) + ||u||^2."""
    floor = (p.nu * p.forcing_norm) ** (2.0 / 3.0)
    y_end = floor + end_enstrophy
    head = float("inf") if y_end == 0 else p.nu ** (5.0 / 3.0) / (3.0 * y_end)
    return head + c.c3 / p.nu ** (4.0 / 3.0) * (floor * length + enstrophy_integral)


def _critical_c3(left: float, constant_part: float, coefficient: float) -> Optional[float]:
    """Smallest c3 >= 2/3 + 1 with left <= constant_part + c3 * coefficient."""
    if coefficient <= 0 or not np.isfinite(constant_part):
        return None
    return max(5.0 / 3.0, (left - constant_part) / coefficient)


def check_da_moment(source: Source, p: FlowParameters, c: ShapeConstants) -> BoundReport:
    """
    Average of |Au|^(2/3) against c3 lambda_1^(1/2) nu^(2/3) G^2.

    Trajectories use the finite-window form, which is vacuous (+inf, so
    INCONCLUSIVE) without forcing, and also report the raw integral bound.
    Measures use the stationary form, whose f = 0 limit is 0.
    """
    scale = p.lambda_1 ** 0.5 * p.nu ** (2.0 / 3.0) * p.grashof ** 2
    details: Dict[str, Any] = {}
    if isinstance(source, Trajectory):
        powers = source.da_norms_sq ** (1.0 / 3.0)
        left, integral, length = _time_average(source, powers)
        _, enstrophy_integral, _ = _time_average(source, source.enstrophies)
        right = da_average_bound(p, c, length)
        factor = 1.0 + 1.0 / (2.0 * p.nu * p.lambda_1 * length)
        raw_right = da_integral_bound(p, c, length, enstrophy_integral)
        unmet = _start_outside_ball(source, p)
        details.update({
            "mode": "trajectory",
            "window": length,
            "raw_integral": integral,
            "raw_bound": raw_right,
            "raw_verdict": verdict_for(integral, raw_right),
        })
        if np.isfinite(right):
            singular = right - c.c3 * scale * factor
            details["critical_c3"] = _critical_c3(left, singular, scale * factor)
    else:
        unmet = None
        left = expect(source, lambda u: da_norm_sq(u) ** (1.0 / 3.0))
        right = da_average_bound(p, c)
        factor = 1.0
        details["mode"] = "measure"
        details["critical_c3"] = _critical_c3(left, 0.0, scale)
    return _report("da_moment", left, right, _constants(c), factor, details, unmet=unmet)


def check_da_integral(traj: Trajectory, p: FlowParameters, c: ShapeConstants,
                      window: Optional[Tuple[float, float]] = None) -> BoundReport:
    """
    int |Au|^(2/3) over [alpha, beta] against the regular-interval estimate.

    The global form (singular at f = 0) is reported alongside in the details.
    """
    if window is not None:
        mask = (traj.times >= window[0] - TIME_RTOL) & (traj.times <= window[1] + TIME_RTOL)
        idx = np.nonzero(mask)[0]
    else:
        idx = np.arange(len(traj))
    if idx.size < 2:
        raise CoverageError("the integral bound needs at least two samples")
    times = traj.times[idx]
    length = float(times[-1] - times[0])
    integral = float(trapezoid(traj.da_norms_sq[idx] ** (1.0 / 3.0), times))
    enstrophy_integral = float(trapezoid(traj.enstrophies[idx], times))
    right = regular_interval_bound(p, c, length, enstrophy_integral, float(traj.enstrophies[idx[-1]]))
    global_right = da_integral_bound(p, c, length, enstrophy_integral)
    details = {
        "interval": [float(times[0]), float(times[-1])],
        "global_bound": global_right,
        "global_verdict": verdict_for(integral, global_right),
    }
    return _report("da_integral", integral, right, _constants(c), 1.0, details)


def check_linf_moment(source: Source, p: FlowParameters, c: ShapeConstants, oversample: int = 1) -> BoundReport:
    """
    Average of |u|_inf against c1 c3^(3/4) lambda_1^(1/2) nu G^2, with the
    Agmon-Hoelder chain c1 (avg ||u||^2)^(1/4) (avg |Au|^(2/3))^(3/4) checked
    in between.

    Trajectories are held to c1 times the finite-window enstrophy bound to
    the 1/4 and the finite-window |Au|^(2/3) bound to the 3/4, which tends
    to the stationary form as the window grows.
    """
    scale = c.c3 ** 0.75 * p.lambda_1 ** 0.5 * p.nu * p.grashof ** 2
    if isinstance(source, Trajectory):
        linf = np.array([linf_norm(u, oversample) for u in source.states])
        left, _, length = _time_average(source, linf)
        enstrophy, _, _ = _time_average(source, source.enstrophies)
        da_moment, _, _ = _time_average(source, source.da_norms_sq ** (1.0 / 3.0))
        enstrophy_right = p.lambda_1 ** 0.5 * p.nu ** 2 * p.grashof ** 2 * (1.0 + 1.0 / (p.nu * p.lambda_1 * length))
        da_right = da_average_bound(p, c, length)
        right = c.c1 * enstrophy_right ** 0.25 * da_right ** 0.75 if np.isfinite(da_right) else float("inf")
        factor = right / (c.c1 * scale) if scale > 0 and np.isfinite(right) else float("inf")
        unmet = _start_outside_ball(source, p)
        mode = "trajectory"
    else:
        left = expect(source, lambda u: linf_norm(u, oversample))
        enstrophy = expect(source, h1_norm_sq)
        da_moment = expect(source, lambda u: da_norm_sq(u) ** (1.0 / 3.0))
        right = c.c1 * scale
        factor = 1.0
        unmet = None
        mode = "measure"
    shape = enstrophy ** 0.25 * da_moment ** 0.75
    chain_right = c.c1 * shape
    details = {
        "mode": mode,
        "chain_right": chain_right,
        "chain_verdict": verdict_for(left, chain_right),
        "critical_c1_chain": left / shape if shape > 0 else None,
        "critical_c1": left * c.c1 / right if 0 < right < float("inf") else None,
    }
    return _report("linf_moment", left, right, _constants(c), factor, details, unmet=unmet)


# ---------------------------------------------------------------------------
# blow-up screening

def gamma_value(t: float, nu: float, forcing_norm: float, c4: float) -> float:
    """nu^(3/2) / (2 c4 |t|^(1/2)) - nu^(2/3) |f|^(2/3)."""
    if t >= 0:
        raise ValueError(f"Gamma is defined for t < 0, got {t}")
    return nu ** 1.5 / (2.0 * c4 * abs(t) ** 0.5) - nu ** (2.0 / 3.0) * forcing_norm ** (2.0 / 3.0)


def gamma(t: float, p: FlowParameters, c: ShapeConstants) -> float:
    """Lower bound on the enstrophy a distance |t| before a blow-up time."""
    return gamma_value(t, p.nu, p.forcing_norm, c.c4)


def gamma_zero_time(p: FlowParameters, c: ShapeConstants) -> float:
    """|t| at which Gamma changes sign: nu^(5/3) / (4 c4^2 |f|^(4/3))."""
    if p.forcing_norm == 0:
        return float("inf")
    return p.nu ** (5.0 / 3.0) / (4.0 * c.c4 ** 2 * p.forcing_norm ** (4.0 / 3.0))


def tau_max_value(nu: float, lambda_1: float, grashof: float, c4: float) -> float:
    if grashof == 0:
        return float("inf")
    return 1.0 / (4.0 * c4 ** 2 * lambda_1 * nu * grashof ** (4.0 / 3.0))


def tau_condition(p: FlowParameters, c: ShapeConstants) -> float:
    """tau_max = 1 / (4 c4^2 lambda_1 nu G^(4/3)); admissible tau lie in (0, tau_max)."""
    return tau_max_value(p.nu, p.lambda_1, p.grashof, c.c4)


def regular_fraction_value(tau: float, nu: float, lambda_1: float, grashof: float, c4: float) -> float:
    """4 c4 lambda_1^(1/2) nu^(1/2) tau^(1/2) G / (1 - 2 c4 lambda_1^(1/2) nu^(1/2) tau^(1/2) G^(2/3))."""
    root = c4 * lambda_1 ** 0.5 * nu ** 0.5 * tau ** 0.5
    return 4.0 * root * grashof / (1.0 - 2.0 * root * grashof ** (2.0 / 3.0))


def screen_irregular(traj: Trajectory, tau: float, p: FlowParameters, c: ShapeConstants) -> bool:
    """
    True when some sample has ||u(t)||^2 >= Gamma(t - beta) for a sample time
    beta in (t, t + tau], the enstrophy a blow-up at beta would force.
    """
    times, enstrophy = traj.times, traj.enstrophies
    for i, t in enumerate(times[:-1]):
        ahead = np.nonzero((times > t) & (times <= t + tau + TIME_RTOL * max(1.0, abs(t))))[0]
        if ahead.size == 0:
            continue
        # Gamma decreases in |t - beta|, so the farthest admissible beta is the weakest threshold
        threshold = gamma(t - times[ahead[-1]], p, c)
        if enstrophy[i] >= threshold:
            return True
    return False


def regular_fraction_bound(tau: float, p: FlowParameters, c: ShapeConstants,
                           ensemble: Optional[Ensemble] = None) -> BoundReport:
    """
    Bound on the mass of solutions that may lose regularity within tau.

    The empirical irregular fraction comes from Gamma screening of the
    ensemble; without an ensemble the verdict is INCONCLUSIVE. The details
    also carry 2 lambda_1^(1/2) nu^2 G^2 / Gamma(-tau), the expression the
    closed form is derived from.
    """
    tau_max = tau_condition(p, c)
    if not 0 < tau < tau_max:
        raise TauConditionError(f"tau={tau} is outside the admissible interval (0, {tau_max})")
    right = regular_fraction_value(tau, p.nu, p.lambda_1, p.grashof, c.c4)
    g = gamma(-tau, p, c)
    derived = 2.0 * p.lambda_1 ** 0.5 * p.nu ** 2 * p.grashof ** 2 / g if g > 0 else float("inf")
    details: Dict[str, Any] = {"tau": tau, "tau_max": tau_max, "gamma_at_minus_tau": g, "derived_bound": derived}
    if ensemble is None:
        left = float("nan")
        details["screened"] = False
    else:
        flags = np.array([screen_irregular(m, tau, p, c) for m in ensemble.members])
        left = float(np.dot(ensemble.weights, flags))
        details.update({"screened": True, "members": len(ensemble), "flagged": int(flags.sum())})
    return _report("regular_fraction", left, right, _constants(c), 1.0, details)


# ---------------------------------------------------------------------------
# sets in phase space

@dataclass(frozen=True)
class SetPredicate:
    """E = {u : lower <= (obs_1(u), ..., obs_k(u)) <= upper}."""
    observables: Tuple[Observable, ...]
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=np.float64)
        upper = np.asarray(self.upper, dtype=np.float64)
        if lower.shape != (len(self.observables),) or upper.shape != lower.shape:
            raise ValueError("one lower and one upper bound per observable")
        if np.any(lower > upper):
            raise ValueError("lower bounds exceed upper bounds")
        object.__setattr__(self, "observables", tuple(self.observables))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def values(self, u: SpectralField) -> np.ndarray:
        return np.array([obs(u) for obs in self.observables])

    def contains(self, u: SpectralField) -> bool:
        v = self.values(u)
        return bool(np.all((v >= self.lower) & (v <= self.upper)))

    def mask(self, states: Sequence[SpectralField]) -> np.ndarray:
        return np.array([self.contains(u) for u in states], dtype=bool)

    @classmethod
    def from_spec(cls, spec: Dict[str, Any], lattice: WaveVectorLattice) -> "SetPredicate":
        """Build from {"observables": [{"kind": ...}], "lower": [...], "upper": [...]}."""
        errors = validate_set_spec(spec)
        if errors:
            raise ValueError("; ".join(f"{k}: {v}" for k, v in errors.items()))
        observables = []
        for obs in spec["observables"]:
            if obs["kind"] == "energy":
                observables.append(energy_observable())
            elif obs["kind"] == "enstrophy":
                observables.append(enstrophy_observable())
            else:
                observables.append(mode_observable(lattice, obs["mode"], obs.get("phase", "cos")))
        return cls(tuple(observables), spec["lower"], spec["upper"])


def _wilson_lower(p_hat: float, n_eff: float, confidence: float) -> float:
    if n_eff <= 0:
        return 0.0
    z = normal_dist.ppf(0.5 + 0.5 * confidence)
    denom = 1.0 + z ** 2 / n_eff
    centre = p_hat + z ** 2 / (2.0 * n_eff)
    spread = z * np.sqrt(p_hat * (1.0 - p_hat) / n_eff + z ** 2 / (4.0 * n_eff ** 2))
    return max(0.0, (centre - spread) / denom)


# ---------------------------------------------------------------------------
# accretion

@dataclass
class AccretionReport:
    mass_E: float
    times: List[float]
    masses: List[float]
    tolerance: float
    exact: List[bool]
    passed: bool
    monotone: bool
    interpolated: int
    atoms_in_E: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mass_E": self.mass_E,
            "atoms_in_E": self.atoms_in_E,
            "times": self.times,
            "mass_sigma_t_E": self.masses,
            "tolerance": self.tolerance,
            "exact": self.exact,
            "passed": self.passed,
            "monotone": self.monotone,
            "interpolated_images": self.interpolated,
            "flow": "single-valued Galerkin flow map",
        }


def accretion_estimate(ensemble: Ensemble, E: SetPredicate, times: Sequence[float],
                       match_tol: Optional[float] = None,
                       confidence: float = WILSON_CONFIDENCE) -> AccretionReport:
    """
    Compare mu(E) with mu(Sigma_t E) for the measure carried by the ensemble's initial states.

    Sigma_t E is the image of the E-atoms under the time-t flow; its mass is
    the weight of atoms that coincide (within ``match_tol`` in L2) with such
    an image. The statistical tolerance is the Wilson half-width of mu(E)
    at the Kish effective sample size.
    """
    atoms = [m.states[0] for m in ensemble.members]
    weights = ensemble.weights
    in_E = E.mask(atoms)
    mass_E = float(np.dot(weights, in_E))
    features = weak_features(atoms, cutoff=ensemble.lattice.n)
    if match_tol is None:
        match_tol = 1e-8 * max(1.0, float(np.max(np.linalg.norm(features, axis=1))))
    n_eff = 1.0 / float(np.sum(weights ** 2))
    tolerance = mass_E - _wilson_lower(mass_E, n_eff, confidence)

    masses, exact, interpolated = [], [], 0
    for t in times:
        images = []
        for member, inside in zip(ensemble.members, in_E):
            if not inside:
                continue
            image, flagged = sample_at(member, member.times[0] + t)
            interpolated += int(flagged)
            images.append(image)
        if images:
            tree = cKDTree(weak_features(images, cutoff=ensemble.lattice.n))
            distances, _ = tree.query(features, k=1)
            hit = distances <= match_tol
        else:
            hit = np.zeros(len(atoms), dtype=bool)
        mass = float(np.dot(weights, hit))
        masses.append(mass)
        exact.append(mass >= mass_E - 1e-12)

    passed = all(m >= mass_E - tolerance for m in masses)
    order = np.argsort(times)
    ordered = np.array(masses)[order]
    monotone = bool(np.all(np.diff(ordered) >= -tolerance - 1e-12))
    if not passed:
        logger.warning(f"Accretion violated: mu(E)={mass_E:.4g}, mu(Sigma_t E)={masses}")
    else:
        logger.info(f"Accretion holds: mu(E)={mass_E:.4g}, mu(Sigma_t E)={masses}")
    return AccretionReport(mass_E, [float(t) for t in times], masses, float(tolerance), exact,
                           passed, monotone, interpolated, int(in_E.sum()))


# ---------------------------------------------------------------------------
# recurrence

@dataclass
class RecurrenceReport:
    visits: int
    eligible: int
    returned: int
    fraction: Optional[float]
    return_times: np.ndarray
    bin_edges: np.ndarray
    counts: np.ndarray
    mode: Optional[float]
    horizon: float
    min_gap: float

    @property
    def empty(self) -> bool:
        return self.visits == 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "visits": self.visits,
            "eligible": self.eligible,
            "returned": self.returned,
            "fraction": self.fraction,
            "mode": self.mode,
            "mean_return_time": float(np.mean(self.return_times)) if self.return_times.size else None,
            "horizon": self.horizon,
            "min_gap": self.min_gap,
            "empty": self.empty,
        }

    def histogram_rows(self):
        for lo, hi, count in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts):
            yield float(lo), float(hi), int(count)

    def to_csv(self, path: str) -> bool:
        return save_to_csv(self.histogram_rows(), ("bin_left", "bin_right", "count"), path)


def _entries(inside: np.ndarray) -> np.ndarray:
    """Indices where the state enters E; a first sample already in E counts as an entry."""
    before = np.concatenate([[False], inside[:-1]])
    return np.nonzero(inside & ~before)[0]


def _first_returns(traj: Trajectory, inside: np.ndarray, horizon: float, min_gap: float):
    times = traj.times
    t_end = times[-1]
    h_tol = TIME_RTOL * max(1.0, horizon)
    entries = _entries(inside)
    eligible = returned = 0
    returns = []
    for i in entries:
        t = times[i]
        if t + horizon > t_end + TIME_RTOL * max(1.0, abs(t_end)):
            continue
        eligible += 1
        ahead = np.nonzero((times > t) & (times - t <= horizon + h_tol))[0]
        if ahead.size and np.all(inside[ahead]):
            # never leaves E within the horizon: in E again at every later sample
            candidates = ahead
        else:
            candidates = entries[(times[entries] > t) & (times[entries] - t <= horizon + h_tol)]
        candidates = candidates[times[candidates] - t >= min_gap - TIME_RTOL]
        if candidates.size:
            returned += 1
            returns.append(float(times[candidates[0]] - t))
    return int(entries.size), eligible, returned, returns


def recurrence_scan(source: Union[Trajectory, Ensemble], E: SetPredicate, horizon: float,
                    min_gap: float = 0.0) -> RecurrenceReport:
    """
    First-return statistics of the visits of a trajectory (or ensemble) to E.

    A visit is an entry of the state into E. A visit at t is eligible when
    t + horizon is still sampled; its first return is the next re-entry within
    the horizon at least ``min_gap`` after t. A state that stays in E for the
    whole horizon returns at the first later sample past ``min_gap``.
    Histogram bins are one sampling step wide and centred on its multiples.
    """
    members = source.members if isinstance(source, Ensemble) else (source,)
    visits = eligible = returned = 0
    returns: List[float] = []
    steps = []
    for traj in members:
        inside = E.mask(traj.states)
        v, e, r, times = _first_returns(traj, inside, horizon, min_gap)
        visits += v
        eligible += e
        returned += r
        returns.extend(times)
        if len(traj) > 1:
            steps.append(float(np.min(np.diff(traj.times))))
    return_times = np.array(returns)
    step = min(steps) if steps else max(horizon, 1.0)
    n_bins = int(np.ceil(horizon / step)) + 1
    edges = (np.arange(n_bins + 1) - 0.5) * step
    counts, _ = np.histogram(return_times, bins=edges)
    mode = float(0.5 * (edges[np.argmax(counts)] + edges[np.argmax(counts) + 1])) if return_times.size else None
    fraction = returned / eligible if eligible else None
    if visits == 0:
        logger.warning("Set E was never visited; recurrence report is empty")
    else:
        logger.info(f"Recurrence: {returned}/{eligible} eligible visits returned (mode {mode})")
    return RecurrenceReport(visits, eligible, returned, fraction, return_times, edges, counts,
                            mode, float(horizon), float(min_gap))


# ---------------------------------------------------------------------------
# energy bounds on trajectories and measures

def attractor_ball_check(m: EmpiricalMeasure, p: FlowParameters, rtol: float = BALL_RTOL) -> BoundReport:
    """Mass outside B_H(R0 (1 + rtol)); a stationary solution carries none."""
    radii = np.sqrt([l2_norm_sq(u) for u in m.states])
    # energies below BOUND_ATOL count as the zero state
    outside = radii > p.r0 * (1.0 + rtol) + np.sqrt(BOUND_ATOL)
    mass_outside = float(np.dot(m.weights, outside))
    details = {"r0": p.r0, "inside_fraction": 1.0 - mass_outside, "max_norm": float(radii.max())}
    return _report("attractor_ball", mass_outside, 0.0, details=details)


def check_energy_estimate(traj: Trajectory, p: FlowParameters, rtol: float = ESTIMATE_RTOL) -> BoundReport:
    """
    |u(t)|^2 <= |u(t')|^2 e^(-nu lambda_1 (t - t')) + |f|^2/(nu^2 lambda_1^2) (1 - e^(-nu lambda_1 (t - t')))
    over all sampled pairs; the report shows the pair with the smallest margin.

    Pairs are scanned one row t' at a time while the smallest margin is kept.
    """
    e = traj.energies
    n = len(traj)
    if n < 2:
        return _report("energy_estimate", float(e[0]), float(e[0]), details={"pairs": 0}, rtol=rtol)
    rate = p.nu * p.lambda_1
    worst = (np.inf, 0, 1, 0.0, 0.0)
    violations = 0
    for i in range(n - 1):
        decay = np.exp(-rate * (traj.times[i + 1:] - traj.times[i]))
        right = e[i] * decay + p.r0 ** 2 * (1.0 - decay)
        left = e[i + 1:]
        margin = (right + rtol * np.abs(right) + BOUND_ATOL) - left
        violations += int(np.sum(margin < 0))
        k = int(np.argmin(margin))
        if margin[k] < worst[0]:
            worst = (float(margin[k]), i, i + 1 + k, float(left[k]), float(right[k]))
    _, a, b, left_worst, right_worst = worst
    details = {
        "pairs": n * (n - 1) // 2,
        "worst_pair": [float(traj.times[a]), float(traj.times[b])],
        "violations": violations,
    }
    return _report("energy_estimate", left_worst, right_worst, details=details, rtol=rtol)


def check_ball_invariance(traj: Trajectory, p: FlowParameters, radius: Optional[float] = None,
                          rtol: float = BALL_RTOL) -> BoundReport:
    """max |u(t)| against R = max(R0, |u(t0)|) unless a radius R >= R0 is given."""
    start = float(np.sqrt(traj.energies[0]))
    if radius is None:
        radius = max(p.r0, start)
    elif radius < p.r0 or start > radius * (1.0 + rtol):
        raise ValueError(f"ball invariance needs R >= R0={p.r0:.6g} and |u(t0)|={start:.6g} <= R={radius:.6g}")
    norms = np.sqrt(traj.energies)
    details = {"radius": radius, "r0": p.r0, "exits": int(np.sum(norms > radius * (1.0 + rtol)))}
    return _report("ball_invariance", float(norms.max()), float(radius), details=details, rtol=rtol)


# ---------------------------------------------------------------------------
# strengthened energy inequality

def check_energy_inequality(m: EmpiricalMeasure, psi: PsiFunction, p: FlowParameters,
                            rtol: float = 1e-10, stat_tol: float = 0.0) -> BoundReport:
    """
    S(psi) = int psi'(|u|^2) (nu ||u||^2 - (f, u)) dmu <= 0.

    A time average over a window T instead satisfies S <= |psi(|u(T)|^2) - psi(|u(0)|^2)| / (2T),
    which becomes the right side; its tolerance widens by stat_tol times the scale.
    """
    left = energy_inequality_residual(m, psi, p)
    right = boundary_allowance(m, lambda u: 0.5 * psi.value(l2_norm_sq(u)))
    scale = energy_inequality_scale(m, psi, p)
    atol = rtol * scale + (stat_tol * scale if right > 0 else 0.0)
    details = {"r": psi.r, "scale": scale, "tolerance": atol}
    return _report("energy_inequality", left, right, details=details, rtol=0.0, atol=atol)


# ---------------------------------------------------------------------------
# suite

def run_verification_suite(p: FlowParameters, c: ShapeConstants,
                           measure: Optional[EmpiricalMeasure] = None,
                           trajectory: Optional[Trajectory] = None,
                           ensemble: Optional[Ensemble] = None,
                           tau: Optional[float] = None,
                           workers: Optional[int] = None,
                           psi_radii: Sequence[float] = (),
                           ball_rtol: float = BALL_RTOL,
                           estimate_rtol: float = ESTIMATE_RTOL,
                           liouville_rtol: float = 1e-10,
                           stat_tol: float = 0.0) -> Dict[str, BoundReport]:
    """Run every verifier that applies to the given inputs; keys are bound ids with a mode suffix."""
    jobs: Dict[str, Callable[[], BoundReport]] = {}
    if measure is not None:
        jobs["time_avg_enstrophy.measure"] = lambda: check_time_avg_enstrophy(measure, p)
        jobs["da_moment.measure"] = lambda: check_da_moment(measure, p, c)
        jobs["linf_moment.measure"] = lambda: check_linf_moment(measure, p, c)
        jobs["attractor_ball.measure"] = lambda: attractor_ball_check(measure, p, ball_rtol)
        for r in psi_radii:
            psi = PsiFunction(float(r))
            jobs[f"energy_inequality.r={r:.6g}"] = (
                lambda psi=psi: check_energy_inequality(measure, psi, p, liouville_rtol, stat_tol))
    if trajectory is not None and len(trajectory) > 1:
        jobs["time_avg_enstrophy.trajectory"] = lambda: check_time_avg_enstrophy(trajectory, p)
        jobs["da_moment.trajectory"] = lambda: check_da_moment(trajectory, p, c)
        jobs["da_integral.trajectory"] = lambda: check_da_integral(trajectory, p, c)
        jobs["linf_moment.trajectory"] = lambda: check_linf_moment(trajectory, p, c)
        jobs["energy_estimate.trajectory"] = lambda: check_energy_estimate(trajectory, p, estimate_rtol)
        jobs["ball_invariance.trajectory"] = lambda: check_ball_invariance(trajectory, p, rtol=ball_rtol)
    if tau is not None:
        jobs["regular_fraction"] = lambda: regular_fraction_bound(tau, p, c, ensemble)

    workers = workers or THREADS
    if workers <= 1:
        return {name: job() for name, job in jobs.items()}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {name: pool.submit(job) for name, job in jobs.items()}
        return {name: future.result() for name, future in futures.items()}


def suite_passed(reports: Dict[str, BoundReport]) -> bool:
    return all(r.verdict != FAIL for r in reports.values())
