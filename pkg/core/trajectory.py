"""
Trajectories and the trajectory-space operators: translation, restriction,
projection onto a time, pasting, the energy-budget audit and omega-limit
estimation.
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.integrate import cumulative_trapezoid

from config.settings import (
    BALL_RTOL,
    BUDGET_RTOL,
    PASTE_TOL,
    TIME_RTOL,
    WEAK_MODE_CUTOFF,
    WEIGHT_TOL,
)
from config.logging_config import logger
from core.errors import CoverageError, IntervalError, PastingMismatchError
from core.lattice import (
    FlowParameters,
    SpectralField,
    WaveVectorLattice,
    _check_same,
    da_norm_sq,
    h1_norm_sq,
    inner,
    l2_norm_sq,
    linf_norm,
)
from utils.helpers import save_to_csv, trapezoid_weights


def _time_tol(t: float) -> float:
    return TIME_RTOL * max(1.0, abs(t))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Time-stamped samples of one solution on an interval.

    ``cum_dissipation`` and ``cum_work`` hold the solver's running integrals
    of nu*||u||^2 and (f, u) at the sample times (zero at the first sample);
    they are absent for trajectories that were not produced by the integrator.
    """
    times: np.ndarray
    states: Tuple[SpectralField, ...]
    interval: Optional[Tuple[float, float]] = None
    provenance: Dict[str, Any] = field(default_factory=dict)
    cum_dissipation: Optional[np.ndarray] = None
    cum_work: Optional[np.ndarray] = None

    def __post_init__(self):
        times = np.array(self.times, dtype=np.float64)
        states = tuple(self.states)
        if times.ndim != 1 or times.size == 0:
            raise ValueError("a trajectory needs at least one sample")
        if times.size != len(states):
            raise ValueError(f"{times.size} times for {len(states)} states")
        if np.any(np.diff(times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        _check_same(*(u.lattice for u in states))
        interval = self.interval
        if interval is None:
            interval = (float(times[0]), float(times[-1]))
        interval = (float(interval[0]), float(interval[1]))
        if times[0] < interval[0] - _time_tol(interval[0]) or times[-1] > interval[1] + _time_tol(interval[1]):
            raise IntervalError(f"samples [{times[0]}, {times[-1]}] leave the interval {interval}")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "interval", interval)
        for name in ("cum_dissipation", "cum_work"):
            values = getattr(self, name)
            if values is None:
                continue
            values = np.array(values, dtype=np.float64)
            if values.shape != times.shape:
                raise ValueError(f"{name} has shape {values.shape}, expected {times.shape}")
            values.setflags(write=False)
            object.__setattr__(self, name, values)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def lattice(self) -> WaveVectorLattice:
        return self.states[0].lattice

    @property
    def has_budget(self) -> bool:
        return self.cum_dissipation is not None and self.cum_work is not None

    @cached_property
    def energies(self) -> np.ndarray:
        """|u(t_i)|^2 (twice the kinetic energy)."""
        return np.array([l2_norm_sq(u) for u in self.states])

    @cached_property
    def enstrophies(self) -> np.ndarray:
        return np.array([h1_norm_sq(u) for u in self.states])

    @cached_property
    def da_norms_sq(self) -> np.ndarray:
        return np.array([da_norm_sq(u) for u in self.states])

    @cached_property
    def linf_norms(self) -> np.ndarray:
        return np.array([linf_norm(u) for u in self.states])

    def node_index(self, t: float) -> Optional[int]:
        """Index of the sample stored at time t, if any."""
        i = int(np.searchsorted(self.times, t))
        for j in (i - 1, i):
            if 0 <= j < len(self.times) and abs(self.times[j] - t) <= _time_tol(t):
                return j
        return None


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Weighted trajectories; a finite surrogate for a measure on trajectory space."""
    weights: np.ndarray
    members: Tuple[Trajectory, ...]

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64)
        members = tuple(self.members)
        if weights.shape != (len(members),) or not members:
            raise ValueError(f"{weights.size} weights for {len(members)} members")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights must be nonnegative and sum to 1 (sum={weights.sum():.15g})")
        _check_same(*(m.lattice for m in members))
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "members", members)

    @classmethod
    def uniform(cls, members: Sequence[Trajectory]) -> "Ensemble":
        return cls(np.full(len(members), 1.0 / len(members)), tuple(members))

    def __len__(self) -> int:
        return len(self.members)

    @property
    def lattice(self) -> WaveVectorLattice:
        return self.members[0].lattice


# ---------------------------------------------------------------------------
# operators on trajectory space

def _subset(traj: Trajectory, keep: np.ndarray, interval: Tuple[float, float],
            shift: float = 0.0, note: Optional[Dict[str, Any]] = None) -> Trajectory:
    idx = np.nonzero(keep)[0]
    if idx.size == 0:
        raise IntervalError(f"no samples of the trajectory fall in {interval}")

    def _rebased(values):
        return None if values is None else values[idx] - values[idx[0]]

    provenance = dict(traj.provenance)
    if note:
        provenance.update(note)
    return Trajectory(
        times=traj.times[idx] - shift,
        states=tuple(traj.states[i] for i in idx),
        interval=interval,
        provenance=provenance,
        cum_dissipation=_rebased(traj.cum_dissipation),
        cum_work=_rebased(traj.cum_work),
    )


def translate(traj: Trajectory, tau: float) -> Trajectory:
    """(sigma_tau u)(t) = u(t + tau), on [t0, t1 - tau]."""
    if tau < 0:
        raise IntervalError(f"translation must be nonnegative, got {tau}")
    t0, t1 = traj.interval
    if t1 - tau < t0 - _time_tol(t0):
        raise IntervalError(f"translation {tau} exceeds the span {t1 - t0} of the trajectory")
    if tau == 0:
        return traj
    keep = traj.times >= t0 + tau - _time_tol(t0 + tau)
    shift_total = tau + float(traj.provenance.get("translated_by", 0.0))
    return _subset(traj, keep, (t0, max(t0, t1 - tau)), shift=tau,
                   note={"translated_by": shift_total})


def restrict(traj: Trajectory, window: Tuple[float, float]) -> Trajectory:
    """Keep the samples in the window J = [a, b], which must lie inside the interval."""
    a, b = float(window[0]), float(window[1])
    t0, t1 = traj.interval
    if a > b or a < t0 - _time_tol(t0) or b > t1 + _time_tol(t1):
        raise IntervalError(f"window {window} is not inside the interval {traj.interval}")
    keep = (traj.times >= a - _time_tol(a)) & (traj.times <= b + _time_tol(b))
    return _subset(traj, keep, (max(a, t0), min(b, t1)))


def sample_at(traj: Trajectory, t: float) -> Tuple[SpectralField, bool]:
    """
    Pi_t: the state at time t, and whether it had to be interpolated.

    Stored nodes are returned exactly; between nodes the coefficients are
    interpolated linearly.
    """
    t0, t1 = traj.interval
    if t < t0 - _time_tol(t0) or t > t1 + _time_tol(t1):
        raise IntervalError(f"time {t} is outside the interval {traj.interval}")
    j = traj.node_index(t)
    if j is not None:
        return traj.states[j], False
    i = int(np.searchsorted(traj.times, t))
    if i == 0 or i == len(traj.times):
        raise IntervalError(f"time {t} is not bracketed by samples [{traj.times[0]}, {traj.times[-1]}]")
    ta, tb = traj.times[i - 1], traj.times[i]
    theta = (t - ta) / (tb - ta)
    return traj.states[i - 1] * (1.0 - theta) + traj.states[i] * theta, True


def paste(first: Trajectory, second: Trajectory, tol: float = PASTE_TOL) -> Trajectory:
    """Concatenate two solutions that meet at the seam time t2."""
    _check_same(first.lattice, second.lattice)
    seam = float(first.times[-1])
    if abs(second.times[0] - seam) > _time_tol(seam) or abs(first.interval[1] - second.interval[0]) > _time_tol(seam):
        raise IntervalError(
            f"trajectories do not share a seam: first ends at {seam}, second starts at {second.times[0]}")
    gap = float(np.sqrt(l2_norm_sq(first.states[-1] - second.states[0])))
    if gap > tol:
        raise PastingMismatchError(gap)

    def _joined(a, b):
        if a is None or b is None:
            return None
        return np.concatenate([a, a[-1] + (b[1:] - b[0])])

    return Trajectory(
        times=np.concatenate([first.times, second.times[1:]]),
        states=first.states + second.states[1:],
        interval=(first.interval[0], second.interval[1]),
        provenance={**first.provenance, "pasted_at": seam},
        cum_dissipation=_joined(first.cum_dissipation, second.cum_dissipation),
        cum_work=_joined(first.cum_work, second.cum_work),
    )


# ---------------------------------------------------------------------------
# energy budget

@dataclass
class BudgetAudit:
    """
    Energy-budget defects D(t', t) for every sampled pair t' < t.

    Only the per-sample series are stored; pairs are formed one row t' at a
    time, so memory stays linear in the number of samples.
    """
    times: np.ndarray
    budget: np.ndarray
    energies: np.ndarray
    dissipation: np.ndarray
    growth_rate: float
    quadrature: str
    mode: str = "inequality"
    rtol: float = BUDGET_RTOL

    def _row(self, i: int):
        """D, tolerance and estimate slack for the pairs (t_i, t_j), j > i."""
        e_j = self.energies[i + 1:]
        d = self.budget[i + 1:] - self.budget[i]
        tol = self.rtol * np.maximum(1.0, np.maximum(self.energies[i], e_j))
        lhs = e_j + (self.dissipation[i + 1:] - self.dissipation[i])
        rhs = self.energies[i] + self.growth_rate * (self.times[i + 1:] - self.times[i])
        return d, tol, rhs - lhs

    def _ok(self, d: np.ndarray, tol: np.ndarray) -> np.ndarray:
        return np.abs(d) <= tol if self.mode == "equality" else d <= tol

    @cached_property
    def _scan(self) -> Dict[str, Any]:
        inequality = equality = estimate = True
        largest = 0.0
        failures = []
        for i in range(len(self.times) - 1):
            d, tol, slack = self._row(i)
            inequality = inequality and bool(np.all(d <= tol))
            equality = equality and bool(np.all(np.abs(d) <= tol))
            estimate = estimate and bool(np.all(slack >= -tol))
            largest = max(largest, float(np.max(np.abs(d))))
            bad = np.nonzero(~self._ok(d, tol))[0]
            failures.extend((float(self.times[i]), float(self.times[i + 1 + j]), float(d[j])) for j in bad)
        return {"inequality": inequality, "equality": equality, "estimate": estimate,
                "max_abs_residual": largest, "failures": failures}

    @property
    def passed_inequality(self) -> bool:
        return self._scan["inequality"]

    @property
    def passed_equality(self) -> bool:
        return self._scan["equality"]

    @property
    def passed_estimate(self) -> bool:
        """|u(t)|^2 + nu int ||u||^2 <= |u(t')|^2 + |f|^2/(nu lambda_1) (t - t')."""
        return self._scan["estimate"]

    @property
    def passed(self) -> bool:
        ok = self.passed_equality if self.mode == "equality" else self.passed_inequality
        return ok and self.passed_estimate

    @property
    def max_abs_residual(self) -> float:
        return self._scan["max_abs_residual"]

    def failures(self) -> List[Tuple[float, float, float]]:
        """(t', t, D) for every failing pair under the audit's mode."""
        return list(self._scan["failures"])

    def rows(self):
        for i in range(len(self.times) - 1):
            d, tol, _ = self._row(i)
            ok = self._ok(d, tol)
            for j in range(d.size):
                yield (float(self.times[i]), float(self.times[i + 1 + j]), float(d[j]),
                       "PASS" if ok[j] else "FAIL")

    def to_csv(self, path: str) -> bool:
        return save_to_csv(self.rows(), ("t_prime", "t", "D", "verdict"), path)

    def summary(self) -> Dict[str, Any]:
        return {
            "samples": int(len(self.times)),
            "quadrature": self.quadrature,
            "mode": self.mode,
            "max_abs_residual": self.max_abs_residual,
            "passed_inequality": self.passed_inequality,
            "passed_equality": self.passed_equality,
            "passed_estimate": self.passed_estimate,
            "failures": len(self.failures()),
        }


def energy_budget_audit(traj: Trajectory, p: FlowParameters, quadrature: str = "auto",
                        mode: str = "inequality", rtol: float = BUDGET_RTOL) -> BudgetAudit:
    """
    D(t', t) = |u(t)|^2/2 + nu int ||u||^2 - |u(t')|^2/2 - int (f, u) over all sample pairs.

    ``quadrature="solver"`` uses the integrals accumulated by the time stepper
    at its own midpoints, ``"trapezoid"`` integrates the sampled norms;
    ``"auto"`` prefers the solver record when the trajectory carries one.
    """
    if mode not in ("inequality", "equality"):
        raise ValueError(f"unknown audit mode {mode!r}")
    _check_same(traj.lattice, p.lattice)
    if quadrature == "auto":
        quadrature = "solver" if traj.has_budget else "trapezoid"
    energies = traj.energies
    if quadrature == "solver":
        if not traj.has_budget:
            raise ValueError("trajectory carries no solver budget record")
        dissipation, work = traj.cum_dissipation, traj.cum_work
    elif quadrature == "trapezoid":
        if len(traj) > 1:
            dissipation = cumulative_trapezoid(p.nu * traj.enstrophies, traj.times, initial=0.0)
            forcing_work = np.array([inner(p.forcing, u) for u in traj.states])
            work = cumulative_trapezoid(forcing_work, traj.times, initial=0.0)
        else:
            dissipation = work = np.zeros(1)
    else:
        raise ValueError(f"unknown quadrature {quadrature!r}")

    g = 0.5 * energies + dissipation - work
    audit = BudgetAudit(traj.times, g, energies, dissipation, p.forcing_norm ** 2 / (p.nu * p.lambda_1),
                        quadrature, mode, rtol)
    if audit.passed:
        logger.info(f"Energy budget audit passed ({quadrature}, max |D|={audit.max_abs_residual:.3e})")
    else:
        logger.warning(f"Energy budget audit FAILED at {len(audit.failures())} pairs "
                       f"({quadrature}, max |D|={audit.max_abs_residual:.3e})")
    return audit


# ---------------------------------------------------------------------------
# long-time behaviour

def observable_series(traj: Trajectory, observable: Callable[[SpectralField], float]) -> np.ndarray:
    return np.array([float(observable(u)) for u in traj.states])


def in_bounded_class(traj: Trajectory, radius: float, rtol: float = BALL_RTOL) -> bool:
    """Membership in U_I(R): every sample satisfies |u| <= R."""
    return bool(np.all(np.sqrt(traj.energies) <= radius * (1.0 + rtol)))


def is_uniformly_bounded(traj: Trajectory, p: FlowParameters, rtol: float = BALL_RTOL) -> bool:
    """Bounded by max(R0, |u(t0)|), the ball that the energy estimate keeps invariant."""
    radius = max(p.r0, float(np.sqrt(traj.energies[0])))
    return in_bounded_class(traj, radius, rtol)


def weak_features(states: Sequence[SpectralField], cutoff: int = WEAK_MODE_CUTOFF) -> np.ndarray:
    """Real feature vectors whose Euclidean distance is the L2 distance on modes |k_i| <= cutoff."""
    lattice = _check_same(*(u.lattice for u in states))
    block = lattice.active & np.all(np.abs(lattice.integer_wavenumbers) <= cutoff, axis=0)
    scale = np.sqrt(lattice.volume * lattice.weights[block])
    rows = []
    for u in states:
        c = u.coeffs[:, block] * scale
        rows.append(np.concatenate([c.real.ravel(), c.imag.ravel()]))
    return np.array(rows)


@dataclass
class OmegaCluster:
    representative: SpectralField
    time: float
    frequency: float
    size: int


def omega_limit_estimate(traj: Trajectory, tail_fraction: float = 0.5, radius: float = 1e-3,
                         cutoff: int = WEAK_MODE_CUTOFF, min_samples: int = 10) -> List[OmegaCluster]:
    """
    Cluster the tail of a trajectory by single linkage in the low-mode L2 distance.

    Each cluster is represented by the sample nearest its mean; frequencies are
    time-weighted fractions of the tail.
    """
    if not 0 < tail_fraction <= 1:
        raise ValueError(f"tail fraction must be in (0, 1], got {tail_fraction}")
    start = traj.times[-1] - tail_fraction * (traj.times[-1] - traj.times[0])
    idx = np.nonzero(traj.times >= start - _time_tol(start))[0]
    if idx.size < min_samples:
        raise CoverageError(f"tail holds {idx.size} samples, need at least {min_samples}")
    features = weak_features([traj.states[i] for i in idx], cutoff)
    labels = fcluster(linkage(features, method="single"), t=radius, criterion="distance")
    weights = trapezoid_weights(traj.times[idx])
    weights = weights / weights.sum() if weights.sum() > 0 else np.full(idx.size, 1.0 / idx.size)

    clusters = []
    for label in np.unique(labels):
        members = np.nonzero(labels == label)[0]
        centre = features[members].mean(axis=0)
        best = members[np.argmin(np.linalg.norm(features[members] - centre, axis=1))]
        clusters.append(OmegaCluster(
            representative=traj.states[idx[best]],
            time=float(traj.times[idx[best]]),
            frequency=float(weights[members].sum()),
            size=int(members.size),
        ))
    clusters.sort(key=lambda c: (-c.frequency, c.time))
    logger.info(f"omega-limit estimate: {len(clusters)} clusters from {idx.size} tail samples")
    return clusters


def detect_period(times: np.ndarray, values: np.ndarray, min_correlation: float = 0.5) -> Optional[float]:
    """
    Period of a uniformly sampled signal from its autocorrelation.

    Returns the lag of the first autocorrelation peak after the first zero
    crossing that reaches ``min_correlation`` (parabolically refined), or
    None when there is no such peak.
    """
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if times.size < 4:
        return None
    steps = np.diff(times)
    if not np.allclose(steps, steps[0], rtol=1e-6, atol=0.0):
        raise ValueError("period detection needs uniformly spaced samples")
    x = values - values.mean()
    if not np.any(x):
        return None
    n = x.size
    spectrum = np.fft.rfft(x, 2 * n)
    acf = np.fft.irfft(np.abs(spectrum) ** 2)[:n]
    acf = acf / acf[0]
    # unbiased normalisation so long lags are not suppressed
    acf = acf * n / (n - np.arange(n))
    crossing = np.nonzero(acf < 0)[0]
    if crossing.size == 0:
        return None
    usable = acf[crossing[0]:n // 2 + 1]
    if usable.size < 3:
        return None
    peaks = np.nonzero((usable[1:-1] >= usable[:-2]) & (usable[1:-1] > usable[2:]))[0] + 1
    peaks = [p for p in peaks if usable[p] >= min_correlation]
    if not peaks:
        return None
    p = peaks[0]
    lag = crossing[0] + p
    y0, y1, y2 = acf[lag - 1], acf[lag], acf[lag + 1]
    denom = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
    return float((lag + shift) * steps[0])
