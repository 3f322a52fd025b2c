"""Dyadic Littlewood-Paley filter bank, Besov norms and ball windows."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .spectral import (
    GridSpec,
    RealField,
    dealias_mask,
    half_spectrum_weights,
    lebesgue_norm,
    wavenumber,
    wavevectors,
)

CHI_INNER = 0.75
CHI_OUTER = 4.0 / 3.0
PHI_INNER = 0.75
PHI_OUTER = 8.0 / 3.0


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def chi(r) -> np.ndarray:
    """Low-frequency cutoff: 1 on ``|xi| <= 3/4``, 0 on ``|xi| >= 4/3``."""
    r = np.abs(np.asarray(r, dtype=float))
    return 1.0 - _smooth_step((r - CHI_INNER) / (CHI_OUTER - CHI_INNER))


def phi(r) -> np.ndarray:
    """Annulus cutoff ``chi(xi/2) - chi(xi)``, supported in ``3/4 <= |xi| <= 8/3``."""
    r = np.asarray(r, dtype=float)
    return chi(r / 2.0) - chi(r)


def max_block_index(grid: GridSpec) -> int:
    """Largest ``j`` whose annulus ``(8/3) 2^j`` stays inside the 2/3 band."""
    return int(math.floor(math.log2(grid.nyquist / 4.0) + 1e-9))


def covering_block_index(grid: GridSpec) -> int:
    """Smallest ``J`` with ``chi(2^{-J-1} xi) = 1`` at every lattice wavevector."""
    top = math.sqrt(3.0) * grid.nyquist
    return max(0, int(math.ceil(math.log2(top / (2.0 * CHI_INNER)))))


@functools.lru_cache(maxsize=256)
def _block_symbol(grid: GridSpec, j: int) -> np.ndarray:
    r = wavenumber(grid)
    if j == -1:
        out = chi(r)
    else:
        out = phi(r / 2.0 ** j)
    out.flags.writeable = False
    return out


@functools.lru_cache(maxsize=256)
def _low_symbol(grid: GridSpec, j: int) -> np.ndarray:
    # S_j = sum_{j' <= j-1} Delta_j' telescopes to chi(2^{-j} xi); S_{-1} = 0.
    if j <= -1:
        out = np.zeros(grid.half_shape)
    else:
        out = chi(wavenumber(grid) / 2.0 ** j)
    out.flags.writeable = False
    return out


def block_symbol(grid: GridSpec, j: int) -> np.ndarray:
    if j <= -2:
        return np.zeros(grid.half_shape)
    return _block_symbol(grid, int(j))


def low_symbol(grid: GridSpec, j: int) -> np.ndarray:
    return _low_symbol(grid, int(j))


@dataclass(frozen=True)
class DyadicBank:
    grid: GridSpec
    chi_profile: Callable = field(default=chi, repr=False)
    phi_profile: Callable = field(default=phi, repr=False)
    j_max: int = 0

    @property
    def j_cover(self) -> int:
        return covering_block_index(self.grid)

    def block_multiplier(self, j: int) -> np.ndarray:
        self._check(j)
        return block_symbol(self.grid, j)

    def low_multiplier(self, j: int) -> np.ndarray:
        self._check(j - 1)
        return low_symbol(self.grid, j)

    def _check(self, j: int):
        if j > self.j_max:
            raise ValueError(
                f"block index {j} exceeds j_max={self.j_max}; its annulus would leave the dealiased band"
            )


def build_bank(grid: GridSpec) -> DyadicBank:
    j_max = max_block_index(grid)
    if j_max < 2:
        raise ValueError(
            f"grid n={grid.n}, L={grid.box_length:g} resolves only j_max={j_max}; need at least 2"
        )
    return DyadicBank(grid=grid, j_max=j_max)


def partition_of_unity_residual(grid: GridSpec, *, band_only: bool = True) -> float:
    """Max of ``|chi(xi) + sum_j phi(2^-j xi) - 1|`` over lattice wavevectors.

    The sum runs over every ``j`` needed to reach the largest lattice
    wavenumber; with ``band_only`` the max is restricted to the 2/3 band.
    """
    r = wavenumber(grid)
    total = chi(r).copy()
    for j in range(covering_block_index(grid) + 1):
        total += phi(r / 2.0 ** j)
    res = np.abs(total - 1.0)
    if band_only:
        res = res[dealias_mask(grid) > 0]
    return float(res.max())


def _as_bank(f: RealField, bank: DyadicBank | None) -> DyadicBank:
    if bank is None:
        return build_bank(f.grid)
    if bank.grid != f.grid:
        raise ValueError("bank and field live on different grids")
    return bank


def block(f: RealField, j: int, bank: DyadicBank | None = None) -> RealField:
    """Littlewood-Paley block Delta_j f (zero for j <= -2)."""
    bank = _as_bank(f, bank)
    if j <= -2:
        return RealField.zeros(f.grid)
    return RealField._wrap_spectrum(f.grid, f.spectrum * bank.block_multiplier(j))


def low_pass(f: RealField, j: int, bank: DyadicBank | None = None) -> RealField:
    """S_j f = sum of blocks below j, i.e. the multiplier chi(2^-j xi)."""
    bank = _as_bank(f, bank)
    if j <= -1:
        return RealField.zeros(f.grid)
    return RealField._wrap_spectrum(f.grid, f.spectrum * bank.low_multiplier(j))


def high_pass(f: RealField, j: int, bank: DyadicBank | None = None) -> RealField:
    """(I - S_j) f."""
    bank = _as_bank(f, bank)
    if j <= -1:
        return f
    return RealField._wrap_spectrum(f.grid, f.spectrum * (1.0 - bank.low_multiplier(j)))


@dataclass(frozen=True)
class BesovParams:
    s: float
    p: float = 2.0
    q: float = 2.0
    homogeneous: bool = False

    def __post_init__(self):
        for name in ("p", "q"):
            v = getattr(self, name)
            if not (v == math.inf or 1.0 <= v < math.inf):
                raise ValueError(f"Besov exponent {name} must lie in [1, inf], got {v}")


def _lq_sum(terms: list[float], q: float) -> float:
    if not terms:
        return 0.0
    a = np.asarray(terms)
    if q == math.inf:
        return float(a.max())
    peak = a.max()
    if peak == 0:
        return 0.0
    return float(peak * np.sum((a / peak) ** q) ** (1.0 / q))


def homogeneous_block_range(grid: GridSpec) -> range:
    """Levels whose annulus meets a nonzero lattice wavevector."""
    lo = int(math.floor(math.log2(grid.k_min / PHI_OUTER))) + 1
    return range(lo, covering_block_index(grid) + 1)


def besov_norm(f: RealField, params: BesovParams, bank: DyadicBank | None = None) -> float:
    """Besov norm from the dyadic block sum.

    Inhomogeneous: ``(sum_{j>=0} 2^{jsq} ||Delta_j f||_p^q)^{1/q} + ||S_0 f||_p``.
    Homogeneous: blocks ``phi(2^-j xi)`` for every ``j`` meeting the lattice,
    including negative ``j``; the zero mode is invisible to all of them.
    Blocks are taken up to the level covering every lattice wavevector.
    """
    grid = f.grid
    s, p, q = params.s, params.p, params.q
    spec = f.spectrum
    r = wavenumber(grid)
    terms = []
    if params.homogeneous:
        levels = homogeneous_block_range(grid)
    else:
        levels = range(0, covering_block_index(grid) + 1)
    for j in levels:
        m = phi(r / 2.0 ** j) if j < 0 else block_symbol(grid, j)
        bj = RealField._wrap_spectrum(grid, spec * m)
        terms.append(2.0 ** (j * s) * lebesgue_norm(bj, p))
    total = _lq_sum(terms, q)
    if not params.homogeneous:
        total += lebesgue_norm(RealField._wrap_spectrum(grid, spec * low_symbol(grid, 0)), p)
    return total


@dataclass(frozen=True)
class BallWindow:
    """Frequency ball ``B(center, h 2^j)``, applied together with its mirror image."""

    center: tuple
    j: int
    h: float

    def __post_init__(self):
        c = tuple(float(x) for x in self.center)
        if len(c) != 3:
            raise ValueError("ball center must be a 3-vector")
        object.__setattr__(self, "center", c)
        if not (0.0 < self.h < 0.125):
            raise ValueError(f"relative radius h must lie in (0, 1/8), got {self.h}")
        mod = math.sqrt(sum(x * x for x in c))
        lo, hi = 2.0 ** (self.j - 2), 2.0 ** (self.j + 2)
        if not (lo <= mod <= hi):
            raise ValueError(f"|center|={mod:g} outside [{lo:g}, {hi:g}] for j={self.j}")

    @property
    def radius(self) -> float:
        return self.h * 2.0 ** self.j

    def indicator(self, grid: GridSpec) -> np.ndarray:
        xi = wavevectors(grid)
        tol = 1e-9 * max(self.radius, grid.k_min)
        rad2 = (self.radius + tol) ** 2
        d_plus = sum((xi[i] - self.center[i]) ** 2 for i in range(3))
        d_minus = sum((xi[i] + self.center[i]) ** 2 for i in range(3))
        return ((d_plus <= rad2) | (d_minus <= rad2)).astype(float)


def ball_localize(f: RealField, w: BallWindow) -> RealField:
    """Sharp frequency restriction to the ball and its reflection through 0.

    A real field has a Hermitian spectrum, so keeping the reflected ball is
    what makes the output real; the two balls are disjoint because
    ``|center| >= 2^{j-2} > h 2^j``.
    """
    grid = f.grid
    reach = math.sqrt(sum(x * x for x in w.center)) + w.radius
    if reach >= grid.dealias_radius:
        raise ValueError(
            f"ball reaches |xi|={reach:g}, beyond the dealiased band {grid.dealias_radius:g}"
        )
    return RealField._wrap_spectrum(grid, f.spectrum * w.indicator(grid))


class UndefinedRatio(ArithmeticError):
    """A diagnostic ratio has a vanishing denominator."""


def bernstein_ratio(f: RealField, j: int, p: float, q: float, bank: DyadicBank | None = None) -> float:
    """``||Delta_j f||_q / (2^{3j(1/p-1/q)} ||Delta_j f||_p)``."""
    if q < p:
        raise ValueError(f"need q >= p, got p={p}, q={q}")
    b = block(f, j, bank)
    den = lebesgue_norm(b, p)
    # Transform round-off leaves ~1e-16 relative residue in blocks the input does not reach.
    if den <= 1e-13 * lebesgue_norm(f, p):
        raise UndefinedRatio(f"block {j} of the input is empty")
    inv = lambda x: 0.0 if x == math.inf else 1.0 / x  # noqa: E731
    return lebesgue_norm(b, q) / (2.0 ** (3 * j * (inv(p) - inv(q))) * den)


def block_energy_split(f: RealField, bank: DyadicBank | None = None) -> tuple[float, float]:
    """Return ``(||f||_2^2, sum_j ||Delta_j f||_2^2)`` over every covering block."""
    grid = f.grid
    w = half_spectrum_weights(grid)
    p = np.abs(f.spectrum) ** 2 * w
    total = float(p.sum())
    parts = sum(float((p * block_symbol(grid, j) ** 2).sum())
                for j in range(-1, covering_block_index(grid) + 1))
    return total * grid.spectral_cell, parts * grid.spectral_cell
