import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from rfl.errors import ConfigParse, MinimalityViolated, NegativeDensity, PoleOnGrid, UnresolvableLag, ZeroDenominator
from rfl.spectra import (
    FrequencyGrid,
    Rational,
    Tabulated,
    density_from_spec,
    eval_density,
    minimality_integral,
    ou_density,
    power,
    weighted_covariance,
)

from .conftest import F_OU, G_OU2, rationals

GRID = FrequencyGrid(64.0, 8192)


def truncated_ou_covariance(tau, cutoff):
    """``(1/pi) int_0^cutoff 2 cos(l tau) / (1 + l^2)`` by adaptive quadrature."""
    return quad(lambda l: 2.0 / (1.0 + l * l) / math.pi, 0.0, cutoff, weight="cos", wvar=tau)[0]


class TestGrid:
    def test_points(self):
        g = FrequencyGrid(4.0, 8)
        np.testing.assert_allclose(g.points, [-4, -3, -2, -1, 0, 1, 2, 3])
        assert g.spacing == 1.0
        assert g.max_lag == pytest.approx(math.pi)

    def test_rejects_odd_count(self):
        with pytest.raises(ValueError):
            FrequencyGrid(1.0, 7)

    def test_matched_cutoff(self):
        assert FrequencyGrid.matched(0.05, 8192).cutoff == pytest.approx(math.pi / 0.05)

    def test_points_read_only(self):
        with pytest.raises(ValueError):
            GRID.points[0] = 0.0


class TestEvalDensity:
    def test_ou_values(self):
        assert eval_density(F_OU, np.array([0.0]))[0] == 2.0
        assert eval_density(F_OU, np.array([1.0]))[0] == 1.0

    def test_tabulated_round_trip(self):
        lam = (0.0, 0.5, 1.0, 2.0)
        vals = (3.0, 2.0, 1.5, 0.25)
        d = Tabulated(lam, vals)
        np.testing.assert_array_equal(eval_density(d, np.array(lam)), vals)
        np.testing.assert_array_equal(eval_density(d, -np.array(lam)), vals)

    def test_negative_density(self):
        d = Tabulated((0.0, 1.0), (1.0, -1.0))
        with pytest.raises(NegativeDensity):
            eval_density(d, np.array([0.0, 1.0]))

    def test_pole_on_grid(self):
        d = Rational((1.0,), (-1.0, 1.0))
        with pytest.raises(PoleOnGrid):
            eval_density(d, FrequencyGrid(4.0, 8))

    def test_rational_rejects_non_integrable(self):
        with pytest.raises(ValueError):
            Rational((1.0, 1.0), (1.0, 1.0))

    def test_ou_density_helper(self):
        d = ou_density(0.25, 2.0)
        np.testing.assert_allclose(eval_density(d, GRID), eval_density(G_OU2, GRID))

    def test_scaled_and_sum(self):
        lam = np.linspace(-5, 5, 11)
        np.testing.assert_allclose((F_OU + 3 * G_OU2)(lam), F_OU(lam) + 3 * G_OU2(lam))

    def test_spec_round_trip(self):
        for d in (F_OU, Tabulated((0.0, 1.0), (1.0, 0.5)), F_OU + 2 * G_OU2):
            assert density_from_spec(d.to_spec()) == d

    def test_bad_spec(self):
        with pytest.raises(ConfigParse):
            density_from_spec({"type": "lorentzian"})
        with pytest.raises(ConfigParse):
            density_from_spec({"type": "rational", "num": [1]})

    @given(rationals())
    def test_even(self, d):
        v = eval_density(d, GRID)
        # index m and n - m are mirror images; index 0 (-cutoff) has no partner
        assert np.max(np.abs(v[1:] - v[1:][::-1])) <= 1e-12 * np.max(v)


class TestFromGrid:
    def test_reproduces_even_grid_values(self):
        v = eval_density(F_OU, GRID)
        t = Tabulated.from_grid(v, GRID)
        np.testing.assert_allclose(eval_density(t, GRID), v, rtol=1e-14)


class TestWeightedCovariance:
    def test_ou_lag_zero_and_one(self):
        w = eval_density(F_OU, GRID)
        r = weighted_covariance(w, GRID, [0.0, 1.0]).real
        # tail beyond the cutoff carries 2 / (pi cutoff) of the variance
        np.testing.assert_allclose(r, [1.0, math.exp(-1.0)], atol=2.0 / (math.pi * GRID.cutoff) + 1e-4)
        exact = [truncated_ou_covariance(t, GRID.cutoff) for t in (0.0, 1.0)]
        np.testing.assert_allclose(r, exact, atol=1e-7)

    def test_zero_weight(self):
        assert weighted_covariance(np.zeros(GRID.n), GRID, 2.5) == 0

    def test_unresolvable_lag(self):
        with pytest.raises(UnresolvableLag):
            weighted_covariance(np.ones(GRID.n), GRID, GRID.max_lag * 1.01)

    @given(rationals())
    def test_lag_zero_is_total_power(self, d):
        w = eval_density(d, GRID)
        r0 = weighted_covariance(w, GRID, 0.0)
        assert r0.real == pytest.approx(GRID.spacing / (2 * math.pi) * np.sum(w), rel=1e-13)

    @given(rationals(), st.lists(st.floats(-20, 20), min_size=1, max_size=8))
    def test_psd(self, d, times):
        t = np.asarray(times)
        K = weighted_covariance(eval_density(d, GRID), GRID, t[:, None] - t[None, :])
        assert np.max(np.abs(K.imag)) <= 1e-12
        assert np.linalg.eigvalsh(K.real).min() >= -1e-10

    @given(rationals(), st.floats(-30, 30))
    def test_real_and_even(self, d, tau):
        w = eval_density(d, GRID)
        r = weighted_covariance(w, GRID, [tau, -tau])
        assert abs(r[0].imag) <= 1e-12
        assert abs(r[0] - r[1]) <= 1e-12

    def test_refinement(self):
        fine = FrequencyGrid(GRID.cutoff, 2 * GRID.n)
        taus = np.array([0.0, 0.5, 1.0, 3.0])
        for d in (F_OU, G_OU2):
            r1 = weighted_covariance(eval_density(d, GRID), GRID, taus).real
            r2 = weighted_covariance(eval_density(d, fine), fine, taus).real
            assert np.max(np.abs(r1 - r2)) <= 1e-6


class TestMinimality:
    def test_p1_finite_and_stable(self):
        v1 = minimality_integral(F_OU, G_OU2, GRID)
        v2 = minimality_integral(F_OU, G_OU2, GRID.doubled())
        assert 0 < v1 < np.inf
        assert abs(v2 - v1) <= 0.01 * v1

    def test_zero_transform(self):
        assert minimality_integral(F_OU, G_OU2, GRID, transform=lambda lam: np.zeros_like(lam)) == 0

    def test_zero_denominator(self):
        zero = Tabulated((0.0, 100.0), (0.0, 0.0))
        with pytest.raises(ZeroDenominator):
            minimality_integral(zero, zero, GRID)

    def test_isolated_zero_tolerated(self):
        f = eval_density(F_OU, GRID)
        f[GRID.n // 2] = 0.0
        assert minimality_integral(f, np.zeros(GRID.n), GRID) > 0

    def test_divergence_flagged(self):
        # density decaying like lambda^-4 against a transform decaying like lambda^-1
        d = Rational((1.0,), (1.0, 2.0, 1.0))
        with pytest.raises(MinimalityViolated):
            minimality_integral(d, d, GRID, transform=lambda lam: 1.0 / (1.0 + np.abs(lam)))

    def test_power(self):
        assert power(F_OU, GRID) == pytest.approx(1.0, abs=0.011)
