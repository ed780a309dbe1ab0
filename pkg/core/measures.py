"""
Empirical measures on phase space and the statistical-solution checks built on them.

A measure is a finite weighted set of states. Time averages along one
trajectory give the Krylov-Bogoliubov surrogates of stationary statistical
solutions; cylindrical test functionals test the Liouville equation and
PsiFunction weights the strengthened energy inequality.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from config.settings import (
    CONVERGENCE_TOL,
    STATIONARITY_TOL,
    THREADS,
    TIME_RTOL,
    WEIGHT_TOL,
)
from config.logging_config import logger
from core.dynamics import rhs_F
from core.errors import CoverageError, LatticeError, NonFiniteObservableError
from core.lattice import (
    FlowParameters,
    SpectralField,
    WaveVectorLattice,
    _check_same,
    bilinear_B,
    da_norm_sq,
    h1_norm_sq,
    inner,
    l2_norm_sq,
    linf_norm,
    random_field,
    single_mode,
)
from core.trajectory import Ensemble, Trajectory
from utils.helpers import trapezoid_weights


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    weights: np.ndarray
    states: Tuple[SpectralField, ...]
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64)
        states = tuple(self.states)
        if not states or weights.shape != (len(states),):
            raise ValueError(f"{weights.size} weights for {len(states)} atoms")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {weights.sum():.15g}, not 1")
        _check_same(*(u.lattice for u in states))
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "states", states)

    @classmethod
    def dirac(cls, u: SpectralField, provenance: Optional[Dict[str, Any]] = None) -> "EmpiricalMeasure":
        return cls(np.ones(1), (u,), provenance or {"kind": "dirac"})

    @classmethod
    def uniform(cls, states: Sequence[SpectralField],
                provenance: Optional[Dict[str, Any]] = None) -> "EmpiricalMeasure":
        return cls(np.full(len(states), 1.0 / len(states)), tuple(states), provenance or {"kind": "uniform"})

    def __len__(self) -> int:
        return len(self.states)

    @property
    def lattice(self) -> WaveVectorLattice:
        return self.states[0].lattice


def collapse_constant(m: EmpiricalMeasure, rtol: float = 1e-10) -> EmpiricalMeasure:
    """The Dirac mass at the first atom when every atom lies within rtol (relative L2) of it."""
    first = m.states[0]
    scale = max(1.0, float(np.sqrt(l2_norm_sq(first))))
    if all(np.sqrt(l2_norm_sq(u - first)) <= rtol * scale for u in m.states[1:]):
        return EmpiricalMeasure.dirac(first, dict(m.provenance, collapsed=len(m)))
    return m


# ---------------------------------------------------------------------------
# observables

@dataclass(frozen=True)
class Observable:
    name: str
    func: Callable[[SpectralField], float]

    def __call__(self, u: SpectralField) -> float:
        return float(self.func(u))


def energy_observable() -> Observable:
    """|u|^2 / 2."""
    return Observable("energy", lambda u: 0.5 * l2_norm_sq(u))


def enstrophy_observable() -> Observable:
    return Observable("enstrophy", h1_norm_sq)


def da_power_observable(power: float = 2.0 / 3.0) -> Observable:
    """|Au|^power; the default exponent is the one of the D(A) moment bound."""
    return Observable(f"da_pow_{power:.4g}", lambda u: da_norm_sq(u) ** (0.5 * power))


def linf_observable(oversample: int = 1) -> Observable:
    return Observable("linf", lambda u: linf_norm(u, oversample))


def projection_observable(v: SpectralField, name: str = "projection") -> Observable:
    """(u, v)_{L2}."""
    return Observable(name, lambda u: inner(u, v))


def mode_direction(lattice: WaveVectorLattice, k: Sequence[int], phase: str = "cos") -> SpectralField:
    """Unit-L2 field 2 d cos(K.x) (or sin) with a real direction d perpendicular to k."""
    k = np.array([int(v) for v in k])
    if not np.any(k):
        raise LatticeError("the zero mode carries no divergence-free direction")
    K = k * np.array([2 * np.pi / p for p in lattice.periods])
    for axis in range(3):
        d = np.eye(3)[axis] - K * K[axis] / K.dot(K)
        if np.linalg.norm(d) > 1e-8:
            break
    amplitude = d.astype(np.complex128) if phase == "cos" else -1j * d
    v = single_mode(lattice, k, amplitude)
    return v / np.sqrt(l2_norm_sq(v))


def mode_observable(lattice: WaveVectorLattice, k: Sequence[int], phase: str = "cos") -> Observable:
    v = mode_direction(lattice, k, phase)
    return projection_observable(v, f"mode_{phase}_{'_'.join(str(int(x)) for x in k)}")


def standard_observables() -> List[Observable]:
    return [energy_observable(), enstrophy_observable(), da_power_observable(), linf_observable()]


def expect(m: EmpiricalMeasure, observable: Callable[[SpectralField], float]) -> float:
    """sum_i w_i obs(u_i)."""
    values = np.array([float(observable(u)) for u in m.states])
    if not np.all(np.isfinite(values)):
        bad = int(np.nonzero(~np.isfinite(values))[0][0])
        raise NonFiniteObservableError(f"observable is not finite on atom {bad}")
    return float(np.dot(m.weights, values))


# ---------------------------------------------------------------------------
# test functionals

@dataclass(frozen=True, eq=False)
class BumpProfile:
    """
    phi(y) = P(y) * beta(|y - c|^2 / rho^2) with beta(s) = exp(-1 / (1 - s)) for s < 1, else 0.

    P(y) = p0 + p.(y - c) is linear, so phi is smooth with support in the
    closed ball of radius rho about c.
    """
    center: np.ndarray
    radius: float
    p0: float = 1.0
    slope: Optional[np.ndarray] = None

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=np.float64))
        if not np.isfinite(self.radius) or self.radius <= 0:
            raise ValueError(f"support radius must be positive, got {self.radius}")
        slope = np.zeros_like(center) if self.slope is None else np.asarray(self.slope, dtype=np.float64)
        if slope.shape != center.shape:
            raise ValueError("slope and center must have the same dimension")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "slope", slope)

    @property
    def dim(self) -> int:
        return self.center.size

    def _parts(self, y: np.ndarray):
        z = np.asarray(y, dtype=np.float64) - self.center
        s = float(z.dot(z)) / self.radius ** 2
        poly = self.p0 + float(self.slope.dot(z))
        if s >= 1.0:
            return z, s, poly, 0.0
        return z, s, poly, float(np.exp(-1.0 / (1.0 - s)))

    def value(self, y: np.ndarray) -> float:
        _, _, poly, bump = self._parts(y)
        return poly * bump

    def gradient(self, y: np.ndarray) -> np.ndarray:
        z, s, poly, bump = self._parts(y)
        if bump == 0.0:
            return np.zeros(self.dim)
        dbump = -bump / (1.0 - s) ** 2
        return self.slope * bump + poly * dbump * 2.0 * z / self.radius ** 2

    @classmethod
    def fit(cls, data: np.ndarray, rng: np.random.Generator, scale: float = 4.0) -> "BumpProfile":
        """Profile whose support radius is ``scale`` times the spread of the data."""
        data = np.atleast_2d(np.asarray(data, dtype=np.float64))
        lo, hi = data.min(axis=0), data.max(axis=0)
        spread = max(float(np.max(hi - lo)), float(np.max(np.abs(data))), 1e-12)
        radius = scale * spread
        offset = rng.standard_normal(data.shape[1])
        center = 0.5 * (lo + hi) + 0.05 * radius * offset / max(np.linalg.norm(offset), 1e-300)
        slope = rng.standard_normal(data.shape[1]) / radius
        return cls(center=center, radius=radius, p0=float(rng.uniform(0.5, 1.5)), slope=slope)


@dataclass(frozen=True, eq=False)
class CylindricalTest:
    """Phi(u) = phi((u, v_1), ..., (u, v_k)) with Phi'(u) = sum_j d_j phi(...) v_j."""
    directions: Tuple[SpectralField, ...]
    profile: BumpProfile
    name: str = "test"

    def __post_init__(self):
        directions = tuple(self.directions)
        if not directions:
            raise ValueError("a cylindrical test needs at least one direction")
        if len(directions) != self.profile.dim:
            raise ValueError(f"{len(directions)} directions for a {self.profile.dim}-dimensional profile")
        if any(l2_norm_sq(v) == 0.0 for v in directions):
            raise ValueError("directions must be nonzero")
        _check_same(*(v.lattice for v in directions))
        object.__setattr__(self, "directions", directions)

    def coordinates(self, u: SpectralField) -> np.ndarray:
        return np.array([inner(u, v) for v in self.directions])

    def __call__(self, u: SpectralField) -> float:
        return self.profile.value(self.coordinates(u))

    def gradient(self, u: SpectralField) -> SpectralField:
        g = self.profile.gradient(self.coordinates(u))
        out = self.directions[0] * g[0]
        for gj, v in zip(g[1:], self.directions[1:]):
            out = out + v * gj
        return out


@dataclass(frozen=True)
class PsiFunction:
    """psi_r(s) = r (1 - exp(-s / r)); increasing, psi(0) = 0, 0 < psi' <= 1."""
    r: float

    def __post_init__(self):
        if not np.isfinite(self.r) or self.r <= 0:
            raise ValueError(f"psi parameter must be positive, got {self.r}")

    def value(self, s: float) -> float:
        return float(-self.r * np.expm1(-s / self.r))

    def derivative(self, s: float) -> float:
        return float(np.exp(-s / self.r))


def random_test_battery(states: Sequence[SpectralField], p: FlowParameters, count: int = 20,
                        seed: int = 0, max_dim: int = 3, max_mode: int = 2) -> List[CylindricalTest]:
    """
    Random cylindrical tests adapted to the given states.

    Directions are low-mode random fields, with the forcing direction mixed in
    when the forcing is nonzero; each profile's support is fitted to the
    coordinates of the states.
    """
    lattice = _check_same(p.lattice, *(u.lattice for u in states))
    rng = np.random.default_rng(seed)
    has_forcing = p.forcing_norm > 0
    tests = []
    for i in range(count):
        dim = int(rng.integers(1, max_dim + 1))
        directions = []
        for j in range(dim):
            if j == 0 and has_forcing and i % 2 == 0:
                directions.append(p.forcing / p.forcing_norm)
                continue
            v = random_field(lattice, rng, max_mode=min(max_mode, lattice.kmax), l2_norm=1.0)
            directions.append(v)
        coords = np.array([[inner(u, v) for v in directions] for u in states])
        tests.append(CylindricalTest(tuple(directions), BumpProfile.fit(coords, rng), name=f"test_{i}"))
    return tests


# ---------------------------------------------------------------------------
# time averages

@dataclass
class AveragingDiagnostics:
    windows: List[float]
    observables: List[str]
    averages: np.ndarray
    band: np.ndarray
    converged: bool
    tolerance: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "windows": list(self.windows),
            "tolerance": self.tolerance,
            "converged": self.converged,
            "observables": {
                name: {
                    "averages": self.averages[:, j].tolist(),
                    "band": self.band[j].tolist(),
                }
                for j, name in enumerate(self.observables)
            },
        }


def _window_indices(traj: Trajectory, start: float, stop: float) -> np.ndarray:
    tol_lo, tol_hi = TIME_RTOL * max(1.0, abs(start)), TIME_RTOL * max(1.0, abs(stop))
    if traj.times[0] > start + tol_lo or traj.times[-1] < stop - tol_hi:
        raise CoverageError(f"trajectory samples [{traj.times[0]}, {traj.times[-1]}] "
                            f"do not cover [{start}, {stop}]")
    idx = np.nonzero((traj.times >= start - tol_lo) & (traj.times <= stop + tol_hi))[0]
    if idx.size < 2 and stop > start:
        raise CoverageError(f"window [{start}, {stop}] holds fewer than two samples")
    return idx


def window_measure(traj: Trajectory, start: float, length: float) -> EmpiricalMeasure:
    """Trapezoid-weighted empirical measure of the samples in [start, start + length]."""
    idx = _window_indices(traj, start, start + length)
    if idx.size == 1:
        weights = np.ones(1)
    else:
        weights = trapezoid_weights(traj.times[idx])
        weights = weights / weights.sum()
    return EmpiricalMeasure(
        weights, tuple(traj.states[i] for i in idx),
        {"kind": "time_average", "t0": float(start), "window": float(length),
         "source": traj.provenance.get("id", "trajectory")},
    )


def time_average_measure(traj: Trajectory, windows: Sequence[float], t0: Optional[float] = None,
                         observables: Optional[Sequence[Observable]] = None,
                         tol: float = CONVERGENCE_TOL) -> Tuple[List[EmpiricalMeasure], AveragingDiagnostics]:
    """
    Krylov-Bogoliubov averages (1/T) int_0^T delta_{u(t0 + t)} dt for each window T.

    Convergence of the generalized limit is judged by the oscillation band of
    each observable average over the last three windows, relative to the largest
    magnitude in the band.
    """
    windows = [float(w) for w in windows]
    if not windows or any(w <= 0 for w in windows) or any(b <= a for a, b in zip(windows, windows[1:])):
        raise ValueError(f"windows must be positive and strictly increasing, got {windows}")
    t0 = float(traj.times[0]) if t0 is None else float(t0)
    observables = list(observables) if observables is not None else standard_observables()
    measures = [window_measure(traj, t0, w) for w in windows]
    averages = np.array([[expect(m, obs) for obs in observables] for m in measures])
    last = averages[-3:]
    band = np.stack([last.min(axis=0), last.max(axis=0)], axis=1)
    widths = band[:, 1] - band[:, 0]
    scales = np.maximum(1.0, np.max(np.abs(last), axis=0))
    converged = len(windows) >= 3 and bool(np.all(widths <= tol * scales))
    diagnostics = AveragingDiagnostics(windows, [o.name for o in observables], averages, band, converged, tol)
    if converged:
        logger.info(f"Time averages converged over windows {windows[-3:]}")
    else:
        logger.warning(f"Time averages not converged (band widths {widths.tolist()})")
    return measures, diagnostics


# ---------------------------------------------------------------------------
# Liouville equation and energy inequalities

def liouville_integrand(m: EmpiricalMeasure, test: CylindricalTest, p: FlowParameters) -> float:
    """int (F(u), Phi'(u)) dmu = int (f, Phi') - nu ((u, Phi')) - b(u, u, Phi') dmu."""
    total = 0.0
    for w, u in zip(m.weights, m.states):
        if w == 0.0:
            continue
        total += w * inner(rhs_F(u, p), test.gradient(u))
    return float(total)


def liouville_residual_stationary(m: EmpiricalMeasure, test: CylindricalTest, p: FlowParameters) -> float:
    return liouville_integrand(m, test, p)


def liouville_scale(m: EmpiricalMeasure, test: CylindricalTest, p: FlowParameters) -> float:
    """Magnitude the stationary residual is compared against: sum w |Phi'| (|f| + nu|Au| + |B(u,u)|)."""
    total = 0.0
    for w, u in zip(m.weights, m.states):
        g = np.sqrt(l2_norm_sq(test.gradient(u)))
        terms = p.forcing_norm + p.nu * np.sqrt(da_norm_sq(u)) + np.sqrt(l2_norm_sq(bilinear_B(u, u)))
        total += w * g * terms
    return float(max(total, 1.0))


def boundary_allowance(m: EmpiricalMeasure, func: Callable[[SpectralField], float]) -> float:
    """
    |func(last atom) - func(first atom)| / T for a time average over a window T, else 0.

    This is the exact defect a finite window leaves in the average of
    d/dt func(u(t)); stationary measures carry none.
    """
    window = m.provenance.get("window")
    if m.provenance.get("kind") != "time_average" or not window or len(m) < 2:
        return 0.0
    return abs(func(m.states[-1]) - func(m.states[0])) / float(window)


def liouville_battery(m: EmpiricalMeasure, tests: Sequence[CylindricalTest], p: FlowParameters,
                      rtol: float = 1e-10, workers: Optional[int] = None,
                      stat_tol: float = 0.0) -> List[Dict[str, Any]]:
    """
    Residual report {test id, residual, scale, tolerance, verdict} for each
    test, evaluated concurrently. Time-average measures are also allowed
    their window boundary term plus stat_tol * scale.
    """
    def _one(test):
        residual = liouville_residual_stationary(m, test, p)
        scale = liouville_scale(m, test, p)
        tolerance = rtol * scale
        if m.provenance.get("kind") == "time_average":
            tolerance += boundary_allowance(m, test) + stat_tol * scale
        verdict = "PASS" if abs(residual) <= tolerance else "FAIL"
        return {"test": test.name, "residual": residual, "scale": scale, "tolerance": tolerance,
                "verdict": verdict}

    workers = workers or THREADS
    if workers <= 1:
        return [_one(t) for t in tests]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_one, tests))


@dataclass(frozen=True, eq=False)
class MeasureFamily:
    """Time-indexed measures {mu_t} sampled at increasing times."""
    times: np.ndarray
    measures: Tuple[EmpiricalMeasure, ...]

    def __post_init__(self):
        times = np.array(self.times, dtype=np.float64)
        if times.shape != (len(self.measures),) or times.size == 0:
            raise ValueError("one time per measure is required")
        if np.any(np.diff(times) <= 0):
            raise ValueError("family times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "measures", tuple(self.measures))

    def window(self, t_prime: float, t: float) -> np.ndarray:
        if t < t_prime:
            raise ValueError(f"need t >= t', got t'={t_prime}, t={t}")
        tol = TIME_RTOL * max(1.0, abs(t_prime), abs(t))
        idx = np.nonzero((self.times >= t_prime - tol) & (self.times <= t + tol))[0]
        if idx.size == 0 or abs(self.times[idx[0]] - t_prime) > tol or abs(self.times[idx[-1]] - t) > tol:
            raise CoverageError(f"family is not sampled at both ends of [{t_prime}, {t}]")
        return idx


def ensemble_family(ensemble: Ensemble) -> MeasureFamily:
    """mu_t = sum_j w_j delta_{u_j(t)} for an ensemble sampled on common times."""
    times = ensemble.members[0].times
    for member in ensemble.members[1:]:
        if member.times.shape != times.shape or not np.allclose(member.times, times, rtol=TIME_RTOL, atol=0.0):
            raise CoverageError("ensemble members are not sampled on common times")
    measures = tuple(
        EmpiricalMeasure(ensemble.weights, tuple(m.states[i] for m in ensemble.members),
                         {"kind": "ensemble", "t": float(times[i])})
        for i in range(len(times))
    )
    return MeasureFamily(times, measures)


def liouville_residual_timedep(family: MeasureFamily, test: CylindricalTest, t_prime: float, t: float,
                               p: FlowParameters) -> float:
    """int Phi dmu_t - int Phi dmu_t' - int_t'^t int (F(u), Phi'(u)) dmu_s ds (trapezoid in s)."""
    idx = family.window(t_prime, t)
    if idx.size == 1:
        return 0.0
    start = expect(family.measures[idx[0]], test)
    end = expect(family.measures[idx[-1]], test)
    integrand = np.array([liouville_integrand(family.measures[i], test, p) for i in idx])
    return float(end - start - trapezoid(integrand, family.times[idx]))


def _energy_integrand(m: EmpiricalMeasure, psi: PsiFunction, p: FlowParameters) -> float:
    total = 0.0
    for w, u in zip(m.weights, m.states):
        total += w * psi.derivative(l2_norm_sq(u)) * (p.nu * h1_norm_sq(u) - inner(p.forcing, u))
    return float(total)


def energy_inequality_scale(m: EmpiricalMeasure, psi: PsiFunction, p: FlowParameters) -> float:
    """sum w psi'(|u|^2) (nu ||u||^2 + |f| |u|), at least 1."""
    total = 0.0
    for w, u in zip(m.weights, m.states):
        energy = l2_norm_sq(u)
        total += w * psi.derivative(energy) * (p.nu * h1_norm_sq(u) + p.forcing_norm * np.sqrt(energy))
    return float(max(total, 1.0))


def energy_inequality_residual(m: Union[EmpiricalMeasure, MeasureFamily], psi: PsiFunction, p: FlowParameters,
                               t_prime: Optional[float] = None, t: Optional[float] = None) -> float:
    """
    Strengthened energy inequality defects.

    For a single measure: S(psi) = int psi'(|u|^2) (nu ||u||^2 - (f, u)) dmu,
    which a stationary solution keeps <= 0. For a family on [t', t]: the
    signed defect

        1/2 int psi(|u|^2) dmu_t + int_t'^t int psi'(|u|^2) (nu ||u||^2 - (f, u)) dmu_s ds
        - 1/2 int psi(|u|^2) dmu_t'

    which must be <= 0.
    """
    if isinstance(m, EmpiricalMeasure):
        return _energy_integrand(m, psi, p)
    if t_prime is None or t is None:
        raise ValueError("the time-dependent form needs t' and t")
    idx = m.window(t_prime, t)

    def _half_psi(measure):
        return 0.5 * expect(measure, lambda u: psi.value(l2_norm_sq(u)))

    if idx.size == 1:
        return 0.0
    integrand = np.array([_energy_integrand(m.measures[i], psi, p) for i in idx])
    return float(_half_psi(m.measures[idx[-1]]) - _half_psi(m.measures[idx[0]])
                 + trapezoid(integrand, m.times[idx]))


# ---------------------------------------------------------------------------
# stationarity and moments

@dataclass
class StationarityReport:
    max_gap: float
    gaps: Dict[str, Dict[str, float]]
    window: float
    stationary: bool
    tolerance: float

    def to_dict(self) -> Dict[str, Any]:
        return {"max_gap": self.max_gap, "gaps": self.gaps, "window": self.window,
                "stationary": self.stationary, "tolerance": self.tolerance}


def stationarity_diagnostic(traj: Trajectory, observables: Sequence[Observable], shifts: Sequence[float],
                            window: Optional[float] = None, tol: float = STATIONARITY_TOL) -> StationarityReport:
    """
    Compare window averages of each observable starting at t0 and at t0 + tau.

    The window defaults to the longest one every shift leaves room for. Gaps
    are relative to max(1, |average at t0|).
    """
    t0, t_end = float(traj.times[0]), float(traj.times[-1])
    shifts = [float(s) for s in shifts]
    if any(s < 0 for s in shifts):
        raise ValueError("shifts must be nonnegative")
    longest = max(shifts, default=0.0)
    if window is None:
        window = t_end - t0 - longest
    if window <= 0 or t0 + longest + window > t_end + TIME_RTOL * max(1.0, abs(t_end)):
        raise CoverageError(f"trajectory span {t_end - t0} is too short for shifts {shifts} and window {window}")
    base = window_measure(traj, t0, window)
    reference = {obs.name: expect(base, obs) for obs in observables}
    gaps: Dict[str, Dict[str, float]] = {obs.name: {} for obs in observables}
    worst = 0.0
    for tau in shifts:
        shifted = window_measure(traj, t0 + tau, window)
        for obs in observables:
            gap = abs(expect(shifted, obs) - reference[obs.name]) / max(1.0, abs(reference[obs.name]))
            gaps[obs.name][f"{tau:.6g}"] = gap
            worst = max(worst, gap)
    stationary = worst <= tol
    if not stationary:
        logger.warning(f"Trajectory is not stationary: max relative gap {worst:.3e} > {tol}")
    return StationarityReport(worst, gaps, float(window), stationary, tol)


def moment_report(m: EmpiricalMeasure, p: Optional[FlowParameters] = None, oversample: int = 1) -> Dict[str, float]:
    """The moments int |u|^2, int ||u||^2, int |Au|^(2/3) and int |u|_inf."""
    if p is not None:
        _check_same(m.lattice, p.lattice)
    return {
        "l2_sq": expect(m, l2_norm_sq),
        "enstrophy": expect(m, h1_norm_sq),
        "da_two_thirds": expect(m, lambda u: da_norm_sq(u) ** (1.0 / 3.0)),
        "linf": expect(m, lambda u: linf_norm(u, oversample)),
    }
