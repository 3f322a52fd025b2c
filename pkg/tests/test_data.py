import math

import numpy as np
import pytest

from kghsim.data import gaussian_bump, power_law_data, random_band_field, random_phases
from kghsim.spectral import GridSpec, dealias_mask, lebesgue_norm, sobolev_norm, wavenumber


def test_gaussian_peak_and_mass():
    grid = GridSpec(64, 10.0, 2.5)
    f = gaussian_bump(grid, 2.0, 0.7)
    assert f.values.max() == pytest.approx(2.0)
    mass = f.values.sum() * grid.cell_volume
    assert mass == pytest.approx(2.0 * (2 * math.pi * 0.49) ** 1.5, rel=1e-10)


def test_gaussian_periodic_wraps():
    grid = GridSpec(32, 2 * math.pi, 2.5)
    f = gaussian_bump(grid, 1.0, 0.5, center=(0.0, 0.0, 0.0))
    g = gaussian_bump(grid, 1.0, 0.5, center=(grid.box_length, 0.0, 0.0))
    np.testing.assert_allclose(f.values, g.values, atol=1e-12)


def test_phases_unit_modulus(grid16):
    ph = random_phases(grid16, 0)
    np.testing.assert_allclose(np.abs(ph), 1.0)


def test_power_law_truncated_to_band(grid32):
    d = power_law_data(grid32, 0.7, 1)
    outside = d.position.spectrum[dealias_mask(grid32) == 0]
    assert np.max(np.abs(outside)) < 1e-15 * np.max(np.abs(d.position.spectrum))


def test_power_law_modulus(grid32):
    d = power_law_data(grid32, 0.5, 1, amplitude=2.0, truncate=False)
    law = 2.0 * (1 + wavenumber(grid32) ** 2) ** (-(0.5 + 1.5 + 0.01) / 2)
    np.testing.assert_allclose(np.abs(d.position.spectrum), law, rtol=1e-12)


def test_power_law_regularity_threshold():
    # The H^sigma norm over a fixed box grows with resolution only for sigma > s.
    out = []
    for n in (32, 64):
        g = GridSpec(n, 2 * math.pi, 2.5)
        d = power_law_data(g, 0.7, 0, truncate=False)
        out.append((sobolev_norm(d.position, 0.2), sobolev_norm(d.position, 1.0)))
    assert out[1][0] / out[0][0] < 1.05
    assert out[1][1] / out[0][1] > 1.2


def test_random_band_field(grid32):
    f = random_band_field(grid32, 3)
    assert lebesgue_norm(f, 2) == pytest.approx(1.0)
    assert abs(f.mean()) < 1e-14
    g = random_band_field(grid32, 3, radius=4.0)
    assert np.max(np.abs(g.spectrum[wavenumber(grid32) >= 4.0])) < 1e-15 * np.max(np.abs(g.spectrum))


def test_seed_reproducible(grid16):
    a = power_law_data(grid16, 0.7, [3, 1]).position.values
    b = power_law_data(grid16, 0.7, [3, 1]).position.values
    np.testing.assert_array_equal(a, b)
