"""Periodic-box discretization of R^3: grids, real fields, transforms and norms.

All fields are real and stored through their half spectrum (``rfftn`` layout,
last axis halved).  The forward transform carries the factor
``(L/n)^3 (2 pi)^{-3/2}`` so that discrete coefficients approximate the
continuum transform ``(2 pi)^{-3/2} \\int e^{-i x.xi} f(x) dx``; with that
normalization Parseval reads ``sum |f_hat|^2 (2 pi / L)^3 = sum |f|^2 (L/n)^3``.
"""

from __future__ import annotations

import functools
import math
import os
import warnings
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import scipy.fft as sfft

Multiplier = Union[np.ndarray, Callable[[tuple], np.ndarray]]


class MeanModeWarning(UserWarning):
    """Input to the Riesz operator carries a mean that the operator discards."""


def fft_workers() -> int:
    raw = os.environ.get("KGH_THREADS")
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class GridSpec:
    """Uniform ``n^3`` lattice on the torus ``[0, L)^3`` plus the Hartree exponent."""

    n: int
    box_length: float
    gamma: float

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
            raise TypeError(f"n must be an integer, got {n!r}")
        if n < 8 or n & (n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {n}")
        if not (math.isfinite(self.box_length) and self.box_length > 0):
            raise ValueError(f"box length must be positive, got {self.box_length}")
        if not (2.0 < self.gamma < 3.0):
            raise ValueError(f"gamma must lie in (2, 3), got {self.gamma}")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "box_length", float(self.box_length))
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def half_shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n // 2 + 1)

    @property
    def dx(self) -> float:
        return self.box_length / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx ** 3

    @property
    def volume(self) -> float:
        return self.box_length ** 3

    @property
    def k_min(self) -> float:
        """Smallest nonzero wavenumber, 2 pi / L."""
        return 2.0 * math.pi / self.box_length

    @property
    def spectral_cell(self) -> float:
        return self.k_min ** 3

    @property
    def nyquist(self) -> float:
        return math.pi * self.n / self.box_length

    @property
    def dealias_radius(self) -> float:
        return 2.0 * self.nyquist / 3.0

    @property
    def transform_factor(self) -> float:
        return self.cell_volume * (2.0 * math.pi) ** -1.5

    def with_gamma(self, gamma: float) -> "GridSpec":
        return GridSpec(self.n, self.box_length, gamma)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable physical coordinates ``x_i = i L / n``."""
        x = np.arange(self.n) * self.dx
        return x[:, None, None], x[None, :, None], x[None, None, :]


@functools.lru_cache(maxsize=32)
def _wavevectors(grid: GridSpec):
    kx = sfft.fftfreq(grid.n, d=1.0 / grid.n) * grid.k_min
    kz = sfft.rfftfreq(grid.n, d=1.0 / grid.n) * grid.k_min
    xi = (kx[:, None, None], kx[None, :, None], kz[None, None, :])
    for a in xi:
        a.flags.writeable = False
    sq = xi[0] ** 2 + xi[1] ** 2 + xi[2] ** 2
    sq.flags.writeable = False
    mod = np.sqrt(sq)
    mod.flags.writeable = False
    weights = np.full(grid.n // 2 + 1, 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    w = np.broadcast_to(weights[None, None, :], grid.half_shape)
    return xi, sq, mod, w


def wavevectors(grid: GridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Physical wavevector components on the half-spectrum lattice (broadcastable)."""
    return _wavevectors(grid)[0]


def wavenumber_squared(grid: GridSpec) -> np.ndarray:
    return _wavevectors(grid)[1]


def wavenumber(grid: GridSpec) -> np.ndarray:
    """``|xi|`` on the half-spectrum lattice."""
    return _wavevectors(grid)[2]


def half_spectrum_weights(grid: GridSpec) -> np.ndarray:
    """Multiplicity of each stored coefficient in the full spectrum (1 or 2)."""
    return _wavevectors(grid)[3]


@functools.lru_cache(maxsize=32)
def dealias_mask(grid: GridSpec) -> np.ndarray:
    """Radial 2/3-rule mask ``|xi| < (2/3) * Nyquist`` as a 0/1 float array."""
    mask = (wavenumber(grid) < grid.dealias_radius).astype(float)
    mask.flags.writeable = False
    return mask


def _rfft(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    return sfft.rfftn(values, workers=fft_workers()) * grid.transform_factor


def _irfft(spectrum: np.ndarray, grid: GridSpec) -> np.ndarray:
    return sfft.irfftn(spectrum / grid.transform_factor, s=grid.shape, workers=fft_workers())


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class RealField:
    """Immutable real field on a :class:`GridSpec`.

    Either representation (samples or half spectrum) may be supplied; the other
    is computed on first access and cached.
    """

    __slots__ = ("grid", "_values", "_spectrum")

    def __init__(self, grid: GridSpec, values=None, *, spectrum=None):
        if (values is None) == (spectrum is None):
            raise ValueError("supply exactly one of values or spectrum")
        self.grid = grid
        self._values = None
        self._spectrum = None
        if values is not None:
            arr = np.array(values, dtype=float)
            if arr.shape != grid.shape:
                raise ValueError(f"values have shape {arr.shape}, grid expects {grid.shape}")
            if not np.all(np.isfinite(arr)):
                bad = int(np.count_nonzero(~np.isfinite(arr)))
                raise ValueError(f"field contains {bad} non-finite samples")
            self._values = _frozen(arr)
        else:
            arr = np.array(spectrum, dtype=complex)
            if arr.shape != grid.half_shape:
                raise ValueError(
                    f"spectrum has shape {arr.shape}, grid expects {grid.half_shape}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValueError("spectrum contains non-finite coefficients")
            self._spectrum = _frozen(arr)

    @classmethod
    def _wrap_spectrum(cls, grid: GridSpec, spectrum: np.ndarray) -> "RealField":
        # Internal: takes ownership, no copy and no validation.
        obj = cls.__new__(cls)
        obj.grid = grid
        obj._values = None
        obj._spectrum = _frozen(spectrum)
        return obj

    @classmethod
    def _wrap_values(cls, grid: GridSpec, values: np.ndarray) -> "RealField":
        obj = cls.__new__(cls)
        obj.grid = grid
        obj._values = _frozen(values)
        obj._spectrum = None
        return obj

    @classmethod
    def zeros(cls, grid: GridSpec) -> "RealField":
        return cls._wrap_values(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: GridSpec, fn: Callable) -> "RealField":
        """Sample ``fn(x, y, z)`` on the lattice."""
        x, y, z = grid.coordinates()
        return cls(grid, np.broadcast_to(fn(x, y, z), grid.shape))

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = _frozen(_irfft(self._spectrum, self.grid))
        return self._values

    @property
    def spectrum(self) -> np.ndarray:
        if self._spectrum is None:
            self._spectrum = _frozen(_rfft(self._values, self.grid))
        return self._spectrum

    @property
    def has_spectrum(self) -> bool:
        return self._spectrum is not None

    def _check_grid(self, other: "RealField"):
        if other.grid != self.grid:
            raise ValueError(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other):
        if not isinstance(other, RealField):
            return NotImplemented
        self._check_grid(other)
        if self._values is not None and other._values is not None:
            return RealField._wrap_values(self.grid, self._values + other._values)
        return RealField._wrap_spectrum(self.grid, self.spectrum + other.spectrum)

    def __sub__(self, other):
        if not isinstance(other, RealField):
            return NotImplemented
        return self + (-other)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, scalar):
        if isinstance(scalar, RealField) or not np.isscalar(scalar):
            return NotImplemented
        c = float(scalar)
        if self._values is not None:
            return RealField._wrap_values(self.grid, self._values * c)
        return RealField._wrap_spectrum(self.grid, self._spectrum * c)

    __rmul__ = __mul__

    def pointwise(self, other: "RealField") -> "RealField":
        """Pointwise product on the lattice (no truncation)."""
        self._check_grid(other)
        return RealField._wrap_values(self.grid, self.values * other.values)

    def mean(self) -> float:
        return float(self.spectrum[0, 0, 0].real / (self.grid.transform_factor * self.grid.n ** 3))

    def __repr__(self):
        return f"RealField(n={self.grid.n}, L={self.grid.box_length:g})"


@dataclass(frozen=True)
class CauchyPair:
    """Field and its time derivative at one instant."""

    position: RealField
    velocity: RealField
    time_stamp: float = 0.0

    def __post_init__(self):
        if self.position.grid != self.velocity.grid:
            raise ValueError("position and velocity live on different grids")

    @property
    def grid(self) -> GridSpec:
        return self.position.grid

    @classmethod
    def zeros(cls, grid: GridSpec, time_stamp: float = 0.0) -> "CauchyPair":
        z = RealField.zeros(grid)
        return cls(z, z, time_stamp)

    def __add__(self, other: "CauchyPair") -> "CauchyPair":
        return CauchyPair(self.position + other.position, self.velocity + other.velocity,
                          self.time_stamp)

    def __sub__(self, other: "CauchyPair") -> "CauchyPair":
        return CauchyPair(self.position - other.position, self.velocity - other.velocity,
                          self.time_stamp)

    def scaled(self, factor: float) -> "CauchyPair":
        return CauchyPair(self.position * factor, self.velocity * factor, self.time_stamp)


def forward_transform(f: RealField | np.ndarray, grid: GridSpec | None = None) -> np.ndarray:
    """Normalized half spectrum of a real field.

    Coefficient ``[i, j, l]`` sits at ``xi = (2 pi / L) * k`` with
    ``k = (fftfreq(n)[i], fftfreq(n)[j], rfftfreq(n)[l]) * n``; the omitted
    half follows from ``f_hat(-xi) = conj(f_hat(xi))``.
    """
    if isinstance(f, RealField):
        return f.spectrum
    if grid is None:
        raise TypeError("a grid is required when transforming a raw array")
    return RealField(grid, f).spectrum


def inverse_transform(spectrum: np.ndarray, grid: GridSpec) -> RealField:
    return RealField(grid, spectrum=spectrum)


def _hermitian_defect(m: np.ndarray, m_neg: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(m))), 1e-300)
    return float(np.max(np.abs(m_neg - np.conj(m)))) / scale


def _self_conjugate_planes_defect(m: np.ndarray, n: int) -> float:
    # Only the kz = 0 and kz = Nyquist planes hold both xi and -xi in the half layout.
    idx = (-np.arange(n)) % n
    worst = 0.0
    scale = max(float(np.max(np.abs(m))), 1e-300)
    for plane in (0, m.shape[2] - 1):
        p = m[:, :, plane]
        flipped = p[idx][:, idx]
        worst = max(worst, float(np.max(np.abs(flipped - np.conj(p)))) / scale)
    return worst


def evaluate_multiplier(grid: GridSpec, m: Multiplier, *, check_hermitian: bool = True) -> np.ndarray:
    """Evaluate ``m`` on the half-spectrum lattice and validate it."""
    if callable(m):
        xi = wavevectors(grid)
        arr = np.broadcast_to(np.asarray(m(xi)), grid.half_shape)
        if check_hermitian and not _is_radial(m):
            neg = np.broadcast_to(np.asarray(m(tuple(-a for a in xi))), grid.half_shape)
            if not (np.all(np.isfinite(arr)) and np.all(np.isfinite(neg))):
                raise ValueError("multiplier is not finite on the grid")
            if _hermitian_defect(arr, neg) > 1e-12:
                raise ValueError("multiplier is not Hermitian; result would not be real")
    else:
        arr = np.broadcast_to(np.asarray(m), grid.half_shape)
        if check_hermitian and _self_conjugate_planes_defect(arr, grid.n) > 1e-12:
            raise ValueError("multiplier array is not Hermitian on the self-conjugate planes")
    if not np.all(np.isfinite(arr)):
        raise ValueError("multiplier is not finite on the grid")
    return arr


def _is_radial(m) -> bool:
    return getattr(m, "radial", False)


def radial(fn: Callable[[np.ndarray], np.ndarray]) -> Callable[[tuple], np.ndarray]:
    """Lift a profile ``g(|xi|)`` to a multiplier, tagged as real and even."""

    def multiplier(xi):
        return fn(np.sqrt(xi[0] ** 2 + xi[1] ** 2 + xi[2] ** 2))

    multiplier.radial = True
    return multiplier


def apply_multiplier(f: RealField, m: Multiplier) -> RealField:
    """Return the field whose spectrum is ``m(xi) * f_hat(xi)``.

    ``m`` is a callable receiving the broadcastable wavevector triple, or an
    array on the half-spectrum lattice.  Non-Hermitian multipliers are
    rejected since the result must stay real.
    """
    arr = evaluate_multiplier(f.grid, m)
    return RealField._wrap_spectrum(f.grid, f.spectrum * arr)


def riesz_symbol(grid: GridSpec, gamma: float | None = None) -> np.ndarray:
    """``|xi|^(gamma-3)`` with the zero mode set to 0."""
    g = grid.gamma if gamma is None else gamma
    if not (2.0 < g < 3.0):
        raise ValueError(f"gamma must lie in (2, 3), got {g}")
    return _riesz_symbol(grid, float(g))


@functools.lru_cache(maxsize=32)
def _riesz_symbol(grid: GridSpec, gamma: float) -> np.ndarray:
    mod = wavenumber(grid)
    out = np.zeros(grid.half_shape)
    nz = mod > 0
    out[nz] = mod[nz] ** (gamma - 3.0)
    out.flags.writeable = False
    return out


def riesz_potential(f: RealField, gamma: float | None = None, *, check_mean: bool = True) -> RealField:
    """Apply ``(-Delta)^((gamma-3)/2)``; the mean of ``f`` is projected out."""
    sym = riesz_symbol(f.grid, gamma)
    spec = f.spectrum
    if check_mean:
        zero_mode = abs(spec[0, 0, 0]) * math.sqrt(f.grid.spectral_cell)
        total = lebesgue_norm(f, 2)
        if total > 0 and zero_mode > 1e-10 * total:
            warnings.warn(
                f"Riesz potential discards a mean mode carrying {zero_mode / total:.3g} of the L2 norm",
                MeanModeWarning,
                stacklevel=2,
            )
    return RealField._wrap_spectrum(f.grid, spec * sym)


def lebesgue_norm(f: RealField, r: float) -> float:
    """Rectangle-rule ``L^r`` norm over the box; ``r = inf`` gives the max norm."""
    if r == math.inf:
        return float(np.max(np.abs(f.values)))
    if not r >= 1:
        raise ValueError(f"Lebesgue exponent must be >= 1, got {r}")
    a = np.abs(f.values)
    peak = float(a.max())
    if peak == 0.0:
        return 0.0
    if r == 2:
        return float(math.sqrt(np.sum(a * a) * f.grid.cell_volume))
    return peak * float(np.sum((a / peak) ** r) * f.grid.cell_volume) ** (1.0 / r)


def spectral_sum(f: RealField, weight: np.ndarray | None = None) -> float:
    """``sum weight(xi) |f_hat(xi)|^2 (2 pi / L)^3`` over the full spectrum."""
    p = np.abs(f.spectrum) ** 2 * half_spectrum_weights(f.grid)
    if weight is not None:
        p = p * weight
    return float(np.sum(p) * f.grid.spectral_cell)


def sobolev_norm(f: RealField | CauchyPair, s: float):
    """Inhomogeneous ``H^s`` norm.

    For a :class:`CauchyPair` returns ``(||phi||_{H^s}, ||phi_t||_{H^{s-1}})``.
    """
    if isinstance(f, CauchyPair):
        return sobolev_norm(f.position, s), sobolev_norm(f.velocity, s - 1.0)
    bracket = 1.0 + wavenumber_squared(f.grid)
    return math.sqrt(spectral_sum(f, bracket ** s))


def gradient_norm(f: RealField) -> float:
    """``||grad f||_{L^2}`` computed spectrally."""
    return math.sqrt(spectral_sum(f, wavenumber_squared(f.grid)))


def inner_product(f: RealField, g: RealField) -> float:
    f._check_grid(g)
    return float(np.sum(f.values * g.values) * f.grid.cell_volume)


def dealias(f: RealField) -> RealField:
    return RealField._wrap_spectrum(f.grid, f.spectrum * dealias_mask(f.grid))
