import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from kghsim.data import gaussian_bump, random_band_field
from kghsim.dynamics import SolverConfig, duhamel_residual, energy, evolve
from kghsim.littlewood_paley import UndefinedRatio, block
from kghsim.propagator import (
    AdmissibleTriple,
    FieldSeries,
    duhamel,
    fit_loglog,
    free_flow,
    free_trajectory,
    mode_energy,
    precise_strichartz_slope,
    resolution_norm,
    spacetime_norm,
    strichartz_ratio,
    sup_sobolev,
    validate_admissible,
)
from kghsim.spectral import CauchyPair, GridSpec, RealField, lebesgue_norm, sobolev_norm

INF = math.inf
Q_GRID = [2 + 0.5 * k for k in range(21)] + [INF]
THETAS = [0, 0.25, 0.5, 1]


def admissible_oracle(q, r, theta):
    """Cleared-denominator form: 4r + 2q(2+theta) <= q r (2+theta), with limits for infinite exponents."""
    if q < 2 or r < 2:
        return False
    if (q, r, theta) == (2, INF, 0):
        return False
    t = Fraction(theta)
    if q == INF and r == INF:
        return True
    if q == INF:
        return 2 * (2 + t) <= Fraction(r) * (2 + t)  # (2+t)/(2r) <= (2+t)/4
    if r == INF:
        return 4 <= Fraction(q) * (2 + t)  # 1/q <= (2+t)/4
    q, r = Fraction(q), Fraction(r)
    return 4 * r + 2 * q * (2 + t) <= q * r * (2 + t)


def cos_mode(grid, k):
    return RealField.from_function(grid, lambda x, y, z: np.cos(k[0] * x + k[1] * y + k[2] * z))


class TestAdmissible:
    def test_excluded_endpoint(self):
        assert validate_admissible(2, INF, 0) is False

    @pytest.mark.parametrize("theta", THETAS)
    def test_energy_endpoint(self, theta):
        assert validate_admissible(INF, 2, theta) is True

    def test_oracle_grid(self):
        mismatches = [
            (q, r, t)
            for q, r, t in itertools.product(Q_GRID, Q_GRID, THETAS)
            if validate_admissible(q, r, t) != admissible_oracle(q, r, t)
        ]
        assert mismatches == []

    def test_boundary_points_are_admissible(self):
        assert validate_admissible(4, 4, 0)
        assert validate_admissible(3, 6, 0)
        assert not validate_admissible(3, 5.5, 0)

    def test_theta_outside_unit_interval(self):
        assert not validate_admissible(INF, 2, 1.5)

    def test_sigma_relation(self):
        tr = AdmissibleTriple(INF, 2, 0.3)
        assert tr.sigma(0.4) == 0.4
        tr = AdmissibleTriple(4, 4, 0)
        assert tr.sigma(1.0) == pytest.approx(1.0 + 0.25 - 3 * 0.25)


class TestFreeFlow:
    def test_eigenmode(self, grid32):
        f = cos_mode(grid32, (1, 0, 0))
        out = free_flow(CauchyPair(f, RealField.zeros(grid32)), 0.7)
        np.testing.assert_allclose(out.position.values, math.cos(0.7 * math.sqrt(2)) * f.values,
                                   atol=1e-13)

    def test_identity_at_zero(self, grid32, rng):
        d = CauchyPair(random_band_field(grid32, rng), random_band_field(grid32, rng))
        out = free_flow(d, 0.0)
        np.testing.assert_array_equal(out.position.spectrum, d.position.spectrum)
        velocity_only = free_flow(CauchyPair(RealField.zeros(grid32), d.velocity), 0.0)
        assert np.max(np.abs(velocity_only.position.values)) == 0.0

    def test_group_property(self, grid32, rng):
        d = CauchyPair(random_band_field(grid32, rng), random_band_field(grid32, rng))
        a = free_flow(free_flow(d, 0.3), 1.1)
        b = free_flow(d, 1.4)
        assert np.max(np.abs(a.position.values - b.position.values)) <= 1e-10
        assert np.max(np.abs(a.velocity.values - b.velocity.values)) <= 1e-10

    def test_mode_energy_conserved(self, grid32, rng):
        d = CauchyPair(random_band_field(grid32, rng), random_band_field(grid32, rng))
        e0 = mode_energy(d)
        for t in np.linspace(0, 4, 9):
            et = mode_energy(free_flow(d, t))
            assert np.max(np.abs(et - e0)) <= 1e-12 * np.max(e0)

    def test_total_energy_conserved(self, grid32, rng):
        d = CauchyPair(random_band_field(grid32, rng), random_band_field(grid32, rng))
        e0 = energy(d)
        assert max(abs(energy(free_flow(d, t)) - e0) for t in np.linspace(0, 4, 9)) <= 1e-12 * e0


class TestDuhamel:
    def test_zero_forcing(self, grid16):
        series = FieldSeries.constant(RealField.zeros(grid16), 1.0, 0.1)
        assert np.max(np.abs(duhamel(series).values)) == 0.0

    def test_constant_forcing_single_mode(self, grid16):
        # int_0^t sin(w(t-s))/w ds = (1 - cos(wt)) / w^2
        g = cos_mode(grid16, (1, 1, 0))
        w = math.sqrt(3.0)
        t = 1.2
        errs = []
        for dt in (0.02, 0.01):
            got = duhamel(FieldSeries.constant(g, t, dt))
            exact = (1 - math.cos(w * t)) / w ** 2
            errs.append(np.max(np.abs(got.values - exact * g.values)))
        assert errs[1] < 1e-4
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)

    def test_richardson_smooth_forcing(self, grid16):
        g = cos_mode(grid16, (2, 0, 0))
        ref_fn = lambda dt: duhamel(_oscillating(grid16, g, 1.0, dt))  # noqa: E731
        ref = ref_fn(1 / 640)
        e1 = lebesgue_norm(ref_fn(1 / 40) - ref, 2)
        e2 = lebesgue_norm(ref_fn(1 / 80) - ref, 2)
        assert 3.5 < e1 / e2 < 4.5

    def test_beyond_horizon_rejected(self, grid16):
        series = FieldSeries.constant(RealField.zeros(grid16), 1.0, 0.1)
        with pytest.raises(ValueError, match="horizon"):
            duhamel(series, 2.0)

    def test_solver_matches_trapezoid_duhamel(self, grid32):
        # Kick-drift-kick with the exact free flow is the trapezoid rule in time.
        d = CauchyPair(gaussian_bump(grid32, 3.0, 0.6), RealField.zeros(grid32))
        for dt in (1 / 16, 1 / 32):
            assert duhamel_residual(evolve(d, SolverConfig(dt, 0.5))) < 1e-12 * lebesgue_norm(d.position, 2)


def _oscillating(grid, g, T, dt):
    m = int(round(T / dt))
    spectra = np.stack([math.cos(3 * k * dt) * g.spectrum for k in range(m + 1)])
    return FieldSeries(grid, dt, spectra)


class TestSpaceTimeNorms:
    def test_constant_in_time(self, grid16, rng):
        f = random_band_field(grid16, rng)
        series = FieldSeries.constant(f, 2.0, 0.25)
        for q, r in [(2, 2), (4, 3), (1, 6)]:
            val = spacetime_norm(series, q, r).value
            assert val == pytest.approx(2.0 ** (1 / q) * lebesgue_norm(f, r), rel=1e-12)

    def test_sup_norm_over_samples(self, grid16, rng):
        d = CauchyPair(random_band_field(grid16, rng), random_band_field(grid16, rng))
        traj = free_trajectory(d, 1.0, 0.1)
        expect = max(lebesgue_norm(traj[k].position, 2) for k in range(len(traj)))
        assert spacetime_norm(traj, INF, 2).value == pytest.approx(expect, rel=1e-14)

    def test_refinement(self, grid16):
        d = CauchyPair(gaussian_bump(grid16, 1.0, 0.8), RealField.zeros(grid16))
        a = spacetime_norm(free_trajectory(d, 1.0, 1 / 50), 4, 4).value
        b = spacetime_norm(free_trajectory(d, 1.0, 1 / 100), 4, 4).value
        assert abs(a - b) / b < 1e-3

    def test_empty_rejected(self):
        from kghsim.propagator import time_norm

        with pytest.raises(ValueError):
            time_norm([], 2, 0.1)


class TestResolutionNorm:
    def setup_method(self):
        self.grid = GridSpec(32, 2 * math.pi, 2.5)
        rng = np.random.default_rng(0)
        d = CauchyPair(random_band_field(self.grid, rng), RealField.zeros(self.grid))
        self.traj = free_trajectory(d, 0.5, 0.1)

    def test_empty_list_is_sup_sobolev(self):
        assert resolution_norm(self.traj, 0.4, []) == sup_sobolev(self.traj, 0.4)

    def test_energy_triple_reduces_to_besov(self):
        tr = AdmissibleTriple(INF, 2, 0.5)
        val = resolution_norm(self.traj, 0.4, [tr]) - sup_sobolev(self.traj, 0.4)
        # B^mu_{2,2} and H^mu agree within the overlap constant.
        assert 0.5 < val / sup_sobolev(self.traj, 0.4) < 2.0

    def test_monotone_in_triples(self):
        trs = [AdmissibleTriple(INF, 2, 0.5), AdmissibleTriple(4, 4, 0), AdmissibleTriple(8, 3, 1)]
        vals = [resolution_norm(self.traj, 0.4, trs[:k]) for k in range(4)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_invalid_triple_rejected(self):
        with pytest.raises(ValueError):
            resolution_norm(self.traj, 0.4, [AdmissibleTriple(2, INF, 0)])


class TestStrichartzRatio:
    grid = GridSpec(64, 2 * math.pi, 2.5)

    def data(self, j, seed):
        rng = np.random.default_rng(seed)
        return CauchyPair(block(random_band_field(self.grid, rng), j),
                          block(random_band_field(self.grid, rng), j))

    def test_energy_pair(self):
        d = self.data(3, 0)
        assert strichartz_ratio(d, 3, AdmissibleTriple(INF, 2, 0.3), 1.0, 0.1) <= math.sqrt(2)

    def test_uniform_in_j(self):
        tr = AdmissibleTriple(4, 4, 0)
        ratios = [strichartz_ratio(self.data(j, j), j, tr, 0.5, 0.05) for j in range(2, 4)]
        assert max(ratios) / min(ratios) < 8

    def test_homogeneity(self):
        d = self.data(2, 1)
        tr = AdmissibleTriple(4, 4, 0)
        a = strichartz_ratio(d, 2, tr, 0.5, 0.05)
        b = strichartz_ratio(d.scaled(10.0), 2, tr, 0.5, 0.05)
        assert a == pytest.approx(b, rel=1e-12)

    def test_zero_data(self):
        z = CauchyPair.zeros(self.grid)
        with pytest.raises(UndefinedRatio):
            strichartz_ratio(z, 2, AdmissibleTriple(4, 4, 0), 0.5, 0.05)


class TestPreciseStrichartz:
    grid = GridSpec(32, 2 * math.pi, 2.5)
    hs = [1 / 16, 1 / 32, 1 / 64]

    def test_needs_three_h(self):
        with pytest.raises(ValueError):
            precise_strichartz_slope(self.grid, 5, 4, self.hs[:2], 1)

    def test_l2_flat(self):
        fit = precise_strichartz_slope(self.grid, 5, 2, self.hs, 3, seed=1)
        assert abs(fit.slope) < 0.1

    def test_slope_sign_stable_under_shorter_window(self):
        a = precise_strichartz_slope(self.grid, 5, 4, self.hs, 4, seed=2)
        b = precise_strichartz_slope(self.grid, 5, 4, self.hs, 4, seed=2, horizon=math.pi / 4)
        assert a.slope > 0 and b.slope > 0

    def test_window_limit(self):
        with pytest.raises(ValueError, match="window"):
            precise_strichartz_slope(self.grid, 5, 4, self.hs, 1, horizon=self.grid.box_length)

    def test_fit_loglog_exact_power(self):
        slope, resid = fit_loglog([1, 2, 4, 8], [3, 3 * 2 ** 0.3, 3 * 4 ** 0.3, 3 * 8 ** 0.3])
        assert slope == pytest.approx(0.3)
        assert resid < 1e-12
