import math
import warnings

import numpy as np
import pytest
from scipy.special import gamma as gamma_fn

from kghsim.data import power_law_data, random_band_field
from kghsim.dynamics import SolverConfig
from kghsim.littlewood_paley import UndefinedRatio, block
from kghsim.propagator import AdmissibleTriple, free_trajectory
from kghsim.probes import (
    LOCAL_TERMS,
    ProbeReport,
    coifman_meyer_symbol,
    commutator_bound_check,
    commutator_residual,
    hls_exponent,
    hls_ratio,
    hls_sweep,
    lemma6_bound_check,
    local_nonlinear_ratios,
    mean_free_gaussians,
    sample_symbol_regime,
    trilinear_ratio,
)
from kghsim.spectral import CauchyPair, GridSpec, RealField
from kghsim.splitting import data_norm, split_evolve

GRID = GridSpec(32, 2 * math.pi, 2.5)
TRIPLES = [AdmissibleTriple(math.inf, 2, 0.4), AdmissibleTriple(4, 4, 0.4)]


def cos_lp(p, L):
    """``||cos(k.x)||_p`` on a cube of side ``L``."""
    mean = gamma_fn((p + 1) / 2) / (math.sqrt(math.pi) * gamma_fn(p / 2 + 1))
    return (L ** 3 * mean) ** (1 / p)


class TestReport:
    def test_summary(self):
        r = ProbeReport("x", {}, (1.0, 4.0, 2.0))
        assert (r.max, r.min, r.maxmin_ratio) == (4.0, 1.0, 4.0)
        assert r.all_finite

    def test_zero_min(self):
        assert ProbeReport("x", {}, (0.0, 1.0)).maxmin_ratio == math.inf

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            ProbeReport("x", {}, (-1.0,))


class TestHLS:
    def test_exponent(self):
        assert hls_exponent(2.0, 2.5) == pytest.approx(3.0)
        assert hls_exponent(1.5, 2.4) == pytest.approx(1 / (1 / 1.5 - 0.2))

    def test_exponent_out_of_range(self):
        with pytest.raises(ValueError):
            hls_exponent(8.0, 2.5)

    def test_single_mode_closed_form(self):
        k = 3.0
        f = RealField.from_function(GRID, lambda x, y, z: np.cos(3 * x))
        expect = k ** (2.5 - 3) * cos_lp(3.0, GRID.box_length) / cos_lp(2.0, GRID.box_length)
        # |cos|^3 has a kink, so the grid quadrature is only accurate to ~1e-5.
        assert hls_ratio(f, 2.0) == pytest.approx(expect, rel=1e-4)

    def test_zero_input(self):
        with pytest.raises(UndefinedRatio):
            hls_ratio(RealField.zeros(GRID), 2.0)

    def test_gaussians_are_mean_free(self):
        for f in mean_free_gaussians(GRID, 5, 3):
            assert abs(f.mean()) < 1e-14

    def test_sweep_is_bounded(self):
        rep = hls_sweep(GRID, count=20, seed=0)
        assert rep.all_finite and len(rep.ratios) == 20
        assert rep.maxmin_ratio < 10


class TestTrilinear:
    def test_degree_zero(self):
        rng = np.random.default_rng(4)
        d = CauchyPair(random_band_field(GRID, rng), random_band_field(GRID, rng))
        a = trilinear_ratio(d, 0.5, TRIPLES, 0.25, 1 / 16)
        b = trilinear_ratio(d.scaled(3.0), 0.5, TRIPLES, 0.25, 1 / 16)
        assert a == pytest.approx(b, rel=1e-10)

    def test_accepts_trajectory(self):
        rng = np.random.default_rng(5)
        d = CauchyPair(random_band_field(GRID, rng), RealField.zeros(GRID))
        a = trilinear_ratio(d, 0.5, TRIPLES, 0.25, 1 / 16)
        b = trilinear_ratio(free_trajectory(d, 0.25, 1 / 16), 0.5, TRIPLES)
        assert a == b

    def test_zero_data(self):
        with pytest.raises(UndefinedRatio):
            trilinear_ratio(CauchyPair.zeros(GRID), 0.5, TRIPLES, 0.25, 1 / 16)

    def test_missing_sampling(self):
        with pytest.raises(ValueError):
            trilinear_ratio(CauchyPair.zeros(GRID), 0.5, TRIPLES)


class TestLocalTerms:
    def setup_method(self):
        d = power_law_data(GRID, 0.7, 2, amplitude=2.0, with_velocity=True)
        self.u, self.v = split_evolve(d, 2, SolverConfig(1 / 16, 0.25))

    def test_all_terms_reported(self):
        out = local_nonlinear_ratios(self.u, self.v)
        assert tuple(out) == LOCAL_TERMS
        assert all(math.isfinite(x) and x > 0 for x in out.values())

    def test_scaling_invariance(self):
        a = local_nonlinear_ratios(self.u, self.v)
        b = local_nonlinear_ratios(self.u.scaled(2.0), self.v.scaled(2.0))
        for name in LOCAL_TERMS:
            assert a[name] == pytest.approx(b[name], rel=1e-10)

    def test_zero_background_gives_nan(self):
        out = local_nonlinear_ratios(self.u, self.v.scaled(0.0))
        assert math.isfinite(out["I(u^2)u"])
        assert all(math.isnan(out[n]) for n in LOCAL_TERMS[1:])

    def test_horizon_mismatch(self):
        with pytest.raises(ValueError):
            local_nonlinear_ratios(self.u, self.v, T=1.0)


class TestCommutator:
    def fields(self, seed):
        rng = np.random.default_rng(seed)
        return random_band_field(GRID, rng), random_band_field(GRID, rng)

    def test_constant_multiplier_commutes(self):
        v, _ = self.fields(0)
        c = RealField(GRID, np.full(GRID.shape, 2.0))
        assert commutator_residual(v, c, 2).norm < 1e-12

    def test_bilinear(self):
        v, u = self.fields(1)
        a = commutator_residual(v, u, 2).norm
        b = commutator_residual(2.0 * v, 3.0 * u, 2).norm
        assert b == pytest.approx(6.0 * a, rel=1e-12)

    def test_cancellation_gain(self):
        v, u = self.fields(2)
        assert commutator_residual(v, u, 2).gain > 1.0

    def test_bound_check_finite(self):
        v, u = self.fields(3)
        assert 0 < commutator_bound_check(v, u, 2, 4.0) < math.inf

    def test_validation(self):
        v, u = self.fields(4)
        with pytest.raises(ValueError):
            commutator_residual(v, u, 1)
        with pytest.raises(ValueError):
            commutator_bound_check(v, u, 2, 2.0)
        with pytest.raises(UndefinedRatio):
            commutator_bound_check(v, RealField.zeros(GRID), 2, 4.0)


class TestSymbol:
    def test_known_point(self):
        mag, _ = coifman_meyer_symbol([[4.0, 0, 0]], [[-2.0, 0, 0]], [1.0], 2.5, 3)
        assert mag[0] == pytest.approx(2.0 ** 1.5)

    @pytest.mark.parametrize("gamma", [2.1, 2.5, 2.9])
    def test_certificate_on_samples(self, gamma):
        xi1, xi2, lam = sample_symbol_regime(4, 4000, seed=1)
        _, cert = coifman_meyer_symbol(xi1, xi2, lam, gamma, 4)
        assert cert.holds
        assert cert.observed_max == pytest.approx(cert.upper)

    def test_outside_regime(self):
        with pytest.raises(ValueError):
            coifman_meyer_symbol([[1.0, 0, 0]], [[0, 0, 0]], [0.5], 2.5, 3)
        with pytest.raises(ValueError):
            coifman_meyer_symbol([[4.0, 0, 0]], [[0, 0, 0]], [1.5], 2.5, 3)


class TestSpaceTimeBound:
    def run(self, J, E_s=None):
        g = GridSpec(64, math.pi / 2, 2.5)
        d = power_law_data(g, 0.7, 0, truncate=False, with_velocity=True)
        cfg = SolverConfig(1 / 64, 0.125)
        u, _ = split_evolve(d, J, cfg)
        from kghsim.splitting import split_data

        high = split_data(d, J)[1]
        e_s = data_norm(d, 0.7) if E_s is None else E_s
        return lemma6_bound_check(u, high, J, 0.7, 2.4, 3.3, 40.0, e_s)

    def test_ratios_finite(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            rep = self.run(3)
        assert rep.ratio_first > 0 and math.isfinite(rep.ratio_first)
        assert rep.ratio_second > 0 and math.isfinite(rep.ratio_second)
        assert rep.warnings == []

    def test_warning_when_hypothesis_fails(self):
        with pytest.warns(RuntimeWarning, match="proxy"):
            rep = self.run(3, E_s=1e-3)
        assert rep.hypothesis_proxy > 10

    def test_zero_background_integrals_vanish(self):
        g = GridSpec(64, math.pi / 2, 2.5)
        d = power_law_data(g, 0.7, 0, truncate=False, with_velocity=True)
        u, _ = split_evolve(d, 3, SolverConfig(1 / 64, 0.125))
        rep = lemma6_bound_check(u, CauchyPair.zeros(g), 3, 0.7, 2.4, 3.3, 40.0, data_norm(d, 0.7))
        assert rep.integral_u2v == 0.0 and rep.integral_uvu == 0.0


@pytest.fixture(scope="module")
def sweep():
    """Level sweep J = 3..5 at gamma = 2.4, s = 0.65 on the lemma6 preset grid."""
    from kghsim.cli import preset_config
    from kghsim.splitting import split_data

    cfg = preset_config("lemma6")
    g = GridSpec(cfg["grid"]["n"], cfg["grid"]["L"], cfg["grid"]["gamma"])
    d = power_law_data(g, 0.65, 0, amplitude=1.0)
    e_s = data_norm(d, 0.65)
    out = []
    for J in (3, 4, 5):
        u, _ = split_evolve(d, J, SolverConfig(1 / 32, 0.25))
        out.append(lemma6_bound_check(u, split_data(d, J)[1], J, 0.65, 2.4, 3.3, 40.0, e_s))
    return out


class TestSpaceTimeSweep:
    def test_bounded_and_largest_at_coarsest_level(self, sweep):
        first = [r.ratio_first for r in sweep]
        second = [r.ratio_second for r in sweep]
        assert all(0 < x < 1 for x in first + second)
        assert first == sorted(first, reverse=True)
        assert second == sorted(second, reverse=True)
        assert all(r.hypothesis_proxy < 10 for r in sweep)

    @pytest.mark.xfail(strict=True, reason="ratios decay roughly 8x per level; spread is ~50-70x")
    def test_spread_below_ten(self, sweep):
        first = [r.ratio_first for r in sweep]
        second = [r.ratio_second for r in sweep]
        assert max(first) / min(first) < 10 and max(second) / min(second) < 10


def test_symbol_is_one_without_shift():
    xi1, xi2, _ = sample_symbol_regime(3, 50, seed=2)
    mag, _ = coifman_meyer_symbol(xi1, xi2, np.zeros(50), 2.5, 3)
    np.testing.assert_allclose(mag, 1.0, rtol=1e-14)
