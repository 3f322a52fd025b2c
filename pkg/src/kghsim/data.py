"""Synthetic initial data: Gaussian bumps, power-law spectra and random band-limited fields."""

from __future__ import annotations

import numpy as np

from .spectral import CauchyPair, GridSpec, RealField, dealias_mask, lebesgue_norm, wavenumber, wavenumber_squared


def _rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def gaussian_bump(grid: GridSpec, amplitude: float = 1.0, width: float | None = None,
                  center=None, *, periodic: bool = True) -> RealField:
    """``A exp(-|x - c|^2 / (2 w^2))`` with the box centre as default ``c``.

    With ``periodic`` the distance is measured on the torus.
    """
    L = grid.box_length
    if width is None:
        width = L / 10.0
    if center is None:
        center = (L / 2.0,) * 3
    x = grid.coordinates()
    d2 = 0.0
    for xi, ci in zip(x, center):
        d = xi - ci
        if periodic:
            d = (d + L / 2.0) % L - L / 2.0
        d2 = d2 + d * d
    return RealField(grid, np.broadcast_to(amplitude * np.exp(-d2 / (2.0 * width ** 2)), grid.shape))


def random_phases(grid: GridSpec, rng) -> np.ndarray:
    """Unit-modulus Hermitian phases taken from the spectrum of real white noise."""
    noise = RealField(grid, _rng(rng).standard_normal(grid.shape)).spectrum
    mag = np.abs(noise)
    return np.where(mag > 0, noise / np.where(mag > 0, mag, 1.0), 1.0)


def power_law_data(grid: GridSpec, s: float, seed=0, *, delta: float = 0.01,
                   amplitude: float = 1.0, truncate: bool = True,
                   with_velocity: bool = False) -> CauchyPair:
    """Data of regularity exactly ``s``: ``|phi0_hat| = A (1+|xi|^2)^{-(s+3/2+delta)/2}``.

    Phases are random.  ``truncate`` restricts the spectrum to the 2/3 band.
    With ``with_velocity`` the velocity gets the same law shifted by one
    derivative (independent phases); otherwise it is zero.
    """
    rng = _rng(seed)
    law = (1.0 + wavenumber_squared(grid)) ** (-(s + 1.5 + delta) / 2.0)
    mask = dealias_mask(grid) if truncate else 1.0
    pos = RealField(grid, spectrum=amplitude * law * random_phases(grid, rng) * mask)
    if with_velocity:
        vlaw = law * np.sqrt(1.0 + wavenumber_squared(grid))
        vel = RealField(grid, spectrum=amplitude * vlaw * random_phases(grid, rng) * mask)
    else:
        vel = RealField.zeros(grid)
    return CauchyPair(pos, vel)


def random_band_field(grid: GridSpec, rng=None, *, radius: float | None = None,
                      normalize: bool = True) -> RealField:
    """Gaussian random field restricted to ``|xi| < radius`` (default: the 2/3 band).

    Coefficients come from the spectrum of real white noise, so they are
    complex Gaussian and Hermitian.  With ``normalize`` the result has unit
    L2 norm.
    """
    rng = _rng(rng)
    spec = RealField(grid, rng.standard_normal(grid.shape)).spectrum
    if radius is None:
        spec = spec * dealias_mask(grid)
    else:
        spec = spec * (wavenumber(grid) < radius)
    spec = spec.copy()
    spec[0, 0, 0] = 0.0
    f = RealField(grid, spectrum=spec)
    if normalize:
        nrm = lebesgue_norm(f, 2)
        if nrm > 0:
            f = f * (1.0 / nrm)
    return f
