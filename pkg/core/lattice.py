"""
Fourier lattice representation of the periodic spaces H, V and D(A).

Fields are stored as Fourier-series coefficients on the half lattice produced
by ``rfftn`` (shape ``(3, n, n, n//2 + 1)``), so that

    u(x) = sum_k u_hat(k) exp(i K(k).x),    K_i = 2 pi k_i / L_i,

with the coefficients at -k implied by Hermitian symmetry. Only the active set
(k != 0 and |k_i| <= (n - 1) // 3 on every axis) carries data: the 2/3 rule is
built into the Galerkin space itself, so every quadratic product of two fields
is resolved exactly on the n-point grid.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Literal, Optional, Sequence, Tuple

import numpy as np
import scipy.fft

from config.settings import (
    DIVERGENCE_RTOL,
    HERMITIAN_RTOL,
    SHAPE_SAMPLES,
    THREADS,
)
from config.logging_config import logger
from core.errors import LatticeError, ShapeConstantsError, SymmetryViolationError

_AXES = (-3, -2, -1)


@dataclass(frozen=True)
class WaveVectorLattice:
    n: int
    periods: Tuple[float, float, float] = (2 * np.pi, 2 * np.pi, 2 * np.pi)

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 4 or self.n % 2:
            raise LatticeError(f"resolution must be an even integer >= 4, got {self.n}")
        periods = tuple(float(p) for p in self.periods)
        if len(periods) != 3 or any(not np.isfinite(p) or p <= 0 for p in periods):
            raise LatticeError(f"periods must be three positive lengths, got {self.periods}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "periods", periods)

    @property
    def coeff_shape(self) -> Tuple[int, int, int, int]:
        return (3, self.n, self.n, self.n // 2 + 1)

    @property
    def grid_shape(self) -> Tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def kmax(self) -> int:
        """Largest retained |k_i| under the 2/3 rule."""
        return (self.n - 1) // 3

    @property
    def volume(self) -> float:
        return float(np.prod(self.periods))

    @cached_property
    def integer_wavenumbers(self) -> np.ndarray:
        k = np.fft.fftfreq(self.n, 1.0 / self.n)
        kz = np.fft.rfftfreq(self.n, 1.0 / self.n)
        grid = np.array(np.meshgrid(k, k, kz, indexing="ij"))
        grid.setflags(write=False)
        return grid

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        scale = np.array([2 * np.pi / p for p in self.periods]).reshape(3, 1, 1, 1)
        K = self.integer_wavenumbers * scale
        K.setflags(write=False)
        return K

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """lambda(k) = |K(k)|^2, the Stokes eigenvalue of mode k."""
        lam = np.sum(self.wavenumbers ** 2, axis=0)
        lam.setflags(write=False)
        return lam

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        mask = np.all(np.abs(self.integer_wavenumbers) <= self.kmax, axis=0)
        mask.setflags(write=False)
        return mask

    @cached_property
    def active(self) -> np.ndarray:
        mask = self.dealias_mask & (self.eigenvalues > 0)
        mask.setflags(write=False)
        return mask

    @cached_property
    def weights(self) -> np.ndarray:
        """Multiplicity of each stored coefficient (2 for the implied conjugates)."""
        kz = self.integer_wavenumbers[2]
        w = np.where(kz > 0, 2.0, 1.0) * self.active
        w.setflags(write=False)
        return w

    @cached_property
    def lambda_1(self) -> float:
        return float(self.eigenvalues[self.active].min())

    @cached_property
    def grid(self) -> np.ndarray:
        axes = [np.arange(self.n) * (p / self.n) for p in self.periods]
        return np.array(np.meshgrid(*axes, indexing="ij"))

    def index_of(self, k: Sequence[int]) -> Tuple[int, int, int]:
        """Storage index of integer wavevector k (k_3 >= 0 half)."""
        k = tuple(int(v) for v in k)
        if k[2] < 0:
            raise LatticeError(f"wavevector {k} is not on the stored half lattice")
        if any(abs(v) > self.kmax for v in k) or k == (0, 0, 0):
            raise LatticeError(f"wavevector {k} is not in the active set (kmax={self.kmax})")
        return (k[0] % self.n, k[1] % self.n, k[2])


def _check_same(*lattices: WaveVectorLattice) -> WaveVectorLattice:
    first = lattices[0]
    for other in lattices[1:]:
        if other != first:
            raise LatticeError(f"lattice mismatch: {first} vs {other}")
    return first


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Divergence-free, zero-mean, real velocity field (an element of P_m H)."""
    lattice: WaveVectorLattice
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if coeffs.shape != self.lattice.coeff_shape:
            raise LatticeError(
                f"coefficient shape {coeffs.shape} does not match lattice {self.lattice.coeff_shape}")
        if coeffs.flags.writeable:
            coeffs = coeffs.copy()
            coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same(self.lattice, other.lattice)
        return SpectralField(self.lattice, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same(self.lattice, other.lattice)
        return SpectralField(self.lattice, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.lattice, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.lattice, -self.coeffs)

    def __truediv__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.lattice, self.coeffs / float(scalar))


def zeros(lattice: WaveVectorLattice) -> SpectralField:
    return SpectralField(lattice, np.zeros(lattice.coeff_shape, dtype=np.complex128))


# ---------------------------------------------------------------------------
# transforms

def to_physical(u: SpectralField, oversample: int = 1) -> np.ndarray:
    """Velocity on the uniform grid, shape (3, m, m, m) with m = oversample * n."""
    lattice = u.lattice
    if oversample == 1:
        return scipy.fft.irfftn(u.coeffs, s=lattice.grid_shape, axes=_AXES,
                                norm="forward", workers=THREADS)
    m = lattice.n * oversample
    padded = np.zeros((3, m, m, m // 2 + 1), dtype=np.complex128)
    idx = np.nonzero(lattice.active)
    ks = lattice.integer_wavenumbers[:, idx[0], idx[1], idx[2]].astype(int)
    padded[:, ks[0] % m, ks[1] % m, ks[2]] = u.coeffs[:, idx[0], idx[1], idx[2]]
    return scipy.fft.irfftn(padded, s=(m, m, m), axes=_AXES, norm="forward", workers=THREADS)


def physical_to_coeffs(lattice: WaveVectorLattice, values: np.ndarray) -> np.ndarray:
    """Raw half-lattice coefficients of a real array of shape (..., n, n, n)."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-3:] != lattice.grid_shape:
        raise LatticeError(f"grid shape {values.shape[-3:]} does not match {lattice.grid_shape}")
    return scipy.fft.rfftn(values, axes=_AXES, norm="forward", workers=THREADS)


def _reflect_plane(plane: np.ndarray) -> np.ndarray:
    """plane[..., i, j] -> plane[..., -i, -j] (indices mod n)."""
    return np.roll(np.flip(plane, axis=(-2, -1)), 1, axis=(-2, -1))


def hermitian_symmetrize(lattice: WaveVectorLattice, raw: np.ndarray) -> np.ndarray:
    """Average the k_3 = 0 plane with its conjugate reflection."""
    out = np.array(raw, dtype=np.complex128, copy=True)
    plane = out[..., 0]
    out[..., 0] = 0.5 * (plane + np.conj(_reflect_plane(plane)))
    return out


def hermitian_defect(lattice: WaveVectorLattice, raw: np.ndarray) -> float:
    plane = np.where(lattice.active[..., 0], raw[..., 0], 0.0)
    return float(np.max(np.abs(plane - np.conj(_reflect_plane(plane))), initial=0.0))


def _project(lattice: WaveVectorLattice, raw: np.ndarray) -> np.ndarray:
    K = lattice.wavenumbers
    lam = np.where(lattice.active, lattice.eigenvalues, 1.0)
    k_dot = np.sum(K * raw, axis=0)
    out = raw - K * (k_dot / lam)
    return np.where(lattice.active, out, 0.0)


# ---------------------------------------------------------------------------
# operators

def leray_project(lattice: WaveVectorLattice, raw: np.ndarray) -> SpectralField:
    """Orthogonal L2 projection onto divergence-free, zero-mean fields of P_m H."""
    raw = np.asarray(raw, dtype=np.complex128)
    if raw.shape != lattice.coeff_shape:
        raise LatticeError(f"coefficient shape {raw.shape} does not match lattice {lattice.coeff_shape}")
    scale = max(1.0, float(np.max(np.abs(raw), initial=0.0)))
    defect = hermitian_defect(lattice, raw)
    if defect > HERMITIAN_RTOL * scale:
        raise SymmetryViolationError(f"input is not Hermitian-symmetric (defect {defect:.3g})")
    return SpectralField(lattice, _project(lattice, raw))


def stokes_apply(u: SpectralField) -> SpectralField:
    return SpectralField(u.lattice, u.lattice.eigenvalues * u.coeffs)


def _advection(lattice: WaveVectorLattice, u_hat: np.ndarray, v_hat: np.ndarray) -> np.ndarray:
    """Projected coefficients of (u . grad) v."""
    u = scipy.fft.irfftn(u_hat, s=lattice.grid_shape, axes=_AXES, norm="forward", workers=THREADS)
    grad_hat = 1j * lattice.wavenumbers[None, :] * v_hat[:, None]
    grad_v = scipy.fft.irfftn(grad_hat, s=lattice.grid_shape, axes=_AXES, norm="forward",
                              workers=THREADS)
    adv = np.einsum("j...,ij...->i...", u, grad_v)
    adv_hat = scipy.fft.rfftn(adv, axes=_AXES, norm="forward", workers=THREADS)
    return _project(lattice, adv_hat)


def bilinear_B(u: SpectralField, v: SpectralField) -> SpectralField:
    lattice = _check_same(u.lattice, v.lattice)
    return SpectralField(lattice, _advection(lattice, u.coeffs, v.coeffs))


def inner(u: SpectralField, v: SpectralField) -> float:
    """(u, v)_{L2} with the volume factor of the box."""
    lattice = _check_same(u.lattice, v.lattice)
    return lattice.volume * float(np.sum(lattice.weights * np.real(u.coeffs * np.conj(v.coeffs))))


def h1_inner(u: SpectralField, v: SpectralField) -> float:
    """((u, v)) = (grad u, grad v)_{L2}."""
    lattice = _check_same(u.lattice, v.lattice)
    return lattice.volume * float(np.sum(lattice.weights * lattice.eigenvalues
                                         * np.real(u.coeffs * np.conj(v.coeffs))))


def trilinear_b(u: SpectralField, v: SpectralField, w: SpectralField) -> float:
    return inner(bilinear_B(u, v), w)


def _weighted_sum(u: SpectralField, power: int) -> float:
    lattice = u.lattice
    spectrum = np.sum(np.abs(u.coeffs) ** 2, axis=0)
    return lattice.volume * float(np.sum(lattice.weights * lattice.eigenvalues ** power * spectrum))


def l2_norm_sq(u: SpectralField) -> float:
    return _weighted_sum(u, 0)


def h1_norm_sq(u: SpectralField) -> float:
    return _weighted_sum(u, 1)


def da_norm_sq(u: SpectralField) -> float:
    return _weighted_sum(u, 2)


def linf_norm(u: SpectralField, oversample: int = 1) -> float:
    values = to_physical(u, oversample)
    return float(np.sqrt(np.max(np.sum(values ** 2, axis=0))))


@dataclass(frozen=True)
class FieldNorms:
    l2: float
    h1: float
    da: float
    linf: float


def norms(u: SpectralField, oversample: int = 1) -> FieldNorms:
    return FieldNorms(
        l2=float(np.sqrt(l2_norm_sq(u))),
        h1=float(np.sqrt(h1_norm_sq(u))),
        da=float(np.sqrt(da_norm_sq(u))),
        linf=linf_norm(u, oversample),
    )


def divergence_max(u: SpectralField) -> float:
    return float(np.max(np.abs(np.sum(u.lattice.wavenumbers * u.coeffs, axis=0))))


# ---------------------------------------------------------------------------
# constructors

def single_mode(lattice: WaveVectorLattice, k: Sequence[int], amplitude: Sequence[complex]) -> SpectralField:
    """Field amplitude*exp(iK.x) + c.c., projected onto divergence-free fields."""
    raw = np.zeros(lattice.coeff_shape, dtype=np.complex128)
    k = tuple(int(v) for v in k)
    if k[2] < 0 or (k[2] == 0 and (k[1] < 0 or (k[1] == 0 and k[0] < 0))):
        k = tuple(-v for v in k)
        amplitude = np.conj(np.asarray(amplitude, dtype=np.complex128))
    i, j, l = lattice.index_of(k)
    raw[:, i, j, l] = np.asarray(amplitude, dtype=np.complex128)
    if l == 0:
        raw[:, (-i) % lattice.n, (-j) % lattice.n, 0] = np.conj(raw[:, i, j, 0])
    return leray_project(lattice, raw)


def random_field(lattice: WaveVectorLattice, rng: np.random.Generator,
                 max_mode: Optional[int] = None, slope: float = 0.0,
                 l2_norm: Optional[float] = None) -> SpectralField:
    """Gaussian divergence-free field with spectrum ~ lambda^(-slope/2) on |k_i| <= max_mode."""
    raw = rng.standard_normal(lattice.coeff_shape) + 1j * rng.standard_normal(lattice.coeff_shape)
    mask = lattice.active
    if max_mode is not None:
        mask = mask & np.all(np.abs(lattice.integer_wavenumbers) <= max_mode, axis=0)
    lam = np.where(lattice.active, lattice.eigenvalues, 1.0)
    raw = np.where(mask, raw * lam ** (-0.5 * slope), 0.0)
    u = leray_project(lattice, hermitian_symmetrize(lattice, raw))
    if l2_norm is not None:
        size = np.sqrt(l2_norm_sq(u))
        if size > 0:
            u = u * (l2_norm / size)
    return u


# ---------------------------------------------------------------------------
# flow parameters and shape constants

@dataclass(frozen=True, eq=False)
class FlowParameters:
    nu: float
    forcing: SpectralField

    def __post_init__(self):
        if not np.isfinite(self.nu) or self.nu <= 0:
            raise ValueError(f"viscosity must be positive, got {self.nu}")
        f = self.forcing
        scale = max(1.0, float(np.max(np.abs(f.lattice.wavenumbers * f.coeffs), initial=0.0)))
        if divergence_max(f) > DIVERGENCE_RTOL * scale:
            raise ValueError("forcing is not divergence-free")
        if np.any(f.coeffs[:, ~f.lattice.active] != 0):
            raise ValueError("forcing has energy outside the active set (nonzero mean or aliased modes)")

    @property
    def lattice(self) -> WaveVectorLattice:
        return self.forcing.lattice

    @cached_property
    def lambda_1(self) -> float:
        return self.lattice.lambda_1

    @cached_property
    def forcing_norm(self) -> float:
        return float(np.sqrt(l2_norm_sq(self.forcing)))

    @cached_property
    def grashof(self) -> float:
        return self.forcing_norm / (self.nu ** 2 * self.lambda_1 ** 0.75)

    @cached_property
    def r0(self) -> float:
        return self.forcing_norm / (self.nu * self.lambda_1)

    def summary(self) -> Dict[str, float]:
        return {
            "nu": self.nu,
            "lambda_1": self.lambda_1,
            "forcing_norm": self.forcing_norm,
            "grashof": self.grashof,
            "r0": self.r0,
        }


@dataclass(frozen=True)
class ShapeConstants:
    c1: float
    c2: float = 1.0
    provenance: Literal["user", "estimated"] = "user"
    samples: int = 0

    def __post_init__(self):
        if not np.isfinite(self.c1) or self.c1 <= 0:
            raise ValueError(f"c1 must be positive, got {self.c1}")
        if not np.isfinite(self.c2) or self.c2 < 1:
            raise ValueError(f"c2 must be >= 1, got {self.c2}")

    @property
    def c3(self) -> float:
        return 2.0 / 3.0 + float(np.cbrt(self.c2))

    @property
    def c4(self) -> float:
        return max(1.0, self.c2 ** 1.5)

    def to_dict(self) -> Dict[str, object]:
        return {"c1": self.c1, "c2": self.c2, "c3": self.c3, "c4": self.c4,
                "provenance": self.provenance, "samples": self.samples}


def agmon_ratio(u: SpectralField, oversample: int = 1) -> float:
    h1 = np.sqrt(h1_norm_sq(u))
    da = np.sqrt(da_norm_sq(u))
    return linf_norm(u, oversample) / np.sqrt(h1 * da)


def trilinear_constant(u: SpectralField) -> float:
    """Smallest c2 with |b(u,u,Au)| <= |Au|^2/4 + c2 ||u||^6 for every rescaling of u (nu = 1)."""
    beta = abs(trilinear_b(u, u, stokes_apply(u)))
    return 6.75 * beta ** 4 / (da_norm_sq(u) ** 3 * h1_norm_sq(u) ** 3)


def estimate_shape_constants(lattice: WaveVectorLattice, samples: int = SHAPE_SAMPLES,
                             seed: int = 0, oversample: int = 1) -> ShapeConstants:
    """
    Empirical lower bounds for the Agmon constant c1 and the trilinear constant c2.

    Samples mix broadband fields of varying spectral slope with sparse
    few-mode fields, so both smooth and rough shapes are sampled.
    """
    if samples < 1:
        raise ShapeConstantsError("sample count must be >= 1")
    rng = np.random.default_rng(seed)
    c1, c2, used = 0.0, 1.0, 0
    for i in range(samples):
        if i % 2:
            u = random_field(lattice, rng, max_mode=int(rng.integers(1, lattice.kmax + 1)))
        else:
            u = random_field(lattice, rng, slope=float(rng.uniform(0.0, 4.0)))
        if l2_norm_sq(u) == 0.0:
            logger.debug(f"skipping degenerate sample {i}")
            continue
        used += 1
        c1 = max(c1, agmon_ratio(u, oversample))
        c2 = max(c2, trilinear_constant(u))
    if used == 0:
        raise ShapeConstantsError("every sample was degenerate")
    logger.info(f"Estimated shape constants from {used} samples: c1={c1:.4g}, c2={c2:.4g}")
    return ShapeConstants(c1=c1, c2=c2, provenance="estimated", samples=used)
