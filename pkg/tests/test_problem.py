import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rfl.errors import ConfigParse, GapTouchesOrigin, GapUnderResolved, OverlappingGaps, ValidationError
from rfl.problem import (
    ExpWindow,
    MissingPattern,
    TabulatedWeight,
    build_pattern,
    build_problem,
    build_target_grid,
    check_weight,
    extend_weight,
    observation_grid,
    pattern_from_spec,
    truncate_weight,
    weight_from_spec,
    weight_transform,
)
from rfl.spectra import FrequencyGrid

from .conftest import A_EXP, GAP1


class TestPattern:
    def test_explicit(self):
        p = build_pattern(gaps=[(-3, -2)])
        assert p.gaps == ((-3.0, -2.0),)
        assert p.mirror == ((2.0, 3.0),)

    def test_empty(self):
        p = build_pattern([])
        assert p.gaps == ()
        t = np.array([0.0, 1.0, 2.5, 100.0])
        assert p.in_support(t).all()

    def test_recursion(self):
        p = build_pattern(segments=[(2, 1)])
        assert p.gaps == ((-4.0, -3.0),)

    def test_recursion_two_segments(self):
        # M_1 = 3, M_2 = 3 + (N_2 + K_2) = 3 + 1.5 = 4.5
        p = build_pattern(segments=[(2, 1), (1, 0.5)])
        assert p.gaps == ((-4.0, -3.0), (-5.0, -4.5))

    def test_sorted_by_right_endpoint(self):
        p = MissingPattern(((-9, -8), (-3, -2)))
        assert p.gaps == ((-3.0, -2.0), (-9.0, -8.0))

    def test_overlap(self):
        with pytest.raises(OverlappingGaps):
            MissingPattern(((-3, -2), (-2.5, -1)))

    def test_touches_origin(self):
        with pytest.raises(GapTouchesOrigin):
            MissingPattern(((-1, 0),))

    def test_bad_segments(self):
        with pytest.raises(ValidationError):
            build_pattern(segments=[(0, 1)])

    def test_spec(self):
        assert pattern_from_spec({"gaps": [[-3, -2]]}) == GAP1
        assert pattern_from_spec({"segments": [{"K": 2, "N": 1}]}).gaps == ((-4.0, -3.0),)
        with pytest.raises(ConfigParse):
            pattern_from_spec({"holes": []})

    @given(st.floats(-20, 20))
    def test_mirror_exact(self, t):
        assert GAP1.in_gaps(t) == GAP1.in_mirror(-t)


class TestTargetGrid:
    def test_example(self):
        g = build_target_grid(GAP1, 2.0, 0.5)
        np.testing.assert_allclose(g.times, [-3, -2.5, -2, 0, 0.5, 1, 1.5, 2])
        assert g.size == 8
        np.testing.assert_array_equal(g.gap_index[0], [0, 1, 2])
        np.testing.assert_array_equal(g.half_index, [3, 4, 5, 6, 7])
        assert not g.active[3]
        assert g.active.sum() == 7

    def test_no_gaps(self):
        g = build_target_grid(MissingPattern(), 1.0, 0.25)
        np.testing.assert_allclose(g.times, [0, 0.25, 0.5, 0.75, 1.0])

    def test_under_resolved(self):
        with pytest.raises(GapUnderResolved):
            build_target_grid(GAP1, 2.0, 2.0)

    def test_strictly_increasing(self):
        g = build_target_grid(MissingPattern(((-9, -8), (-3, -2))), 4.0, 0.1)
        assert np.all(np.diff(g.times) > 0)

    def test_observation_grid(self):
        t = observation_grid(GAP1, 4.0, 0.5)
        np.testing.assert_allclose(t, [-4, -3.5, -1.5, -1, -0.5, 0])


class TestWeights:
    def test_extend_examples(self):
        v = extend_weight(A_EXP, GAP1, np.array([2.5, 1.0, -2.5]))
        np.testing.assert_allclose(v, [0.0, math.exp(-1.0), 0.0])

    def test_extend_averages_jumps(self):
        v = extend_weight(A_EXP, GAP1, np.array([0.0, 2.0, 3.0, 5.0]))
        np.testing.assert_allclose(v, 0.5 * np.exp(-np.array([0.0, 2.0, 3.0, 5.0])))

    def test_truncate_identity(self):
        assert truncate_weight(A_EXP, 5.0) == A_EXP

    def test_truncate_short(self):
        a1 = truncate_weight(A_EXP, 1.0)
        t = np.array([0.0, 0.5, 1.0, 1.5, 3.0])
        np.testing.assert_allclose(a1(t), np.where(t <= 1.0, np.exp(-t), 0.0))

    def test_truncate_zero(self):
        a0 = truncate_weight(A_EXP, 0.0)
        assert np.all(a0(np.linspace(0, 6, 13)) == 0)

    def test_truncate_tabulated(self):
        a = TabulatedWeight((0.0, 1.0, 2.0), (1.0, 2.0, 0.0))
        a1 = truncate_weight(a, 1.5)
        np.testing.assert_allclose(a1(np.array([0.5, 1.5, 1.75])), [1.5, 1.0, 0.0])

    @given(st.floats(0.3, 6.0), st.floats(0.1, 3.0))
    def test_extend_truncate_commutes(self, n, rate):
        a = ExpWindow(rate, 5.0)
        t = np.arange(0.0, n, 0.1) + 0.05
        t = t[t < n]
        left = extend_weight(truncate_weight(a, n), GAP1, t)
        right = extend_weight(a, GAP1, t)
        np.testing.assert_allclose(left, right)

    def test_integrability(self):
        l1, l2 = check_weight(A_EXP, 8.0, 0.001)
        assert l1 == pytest.approx(1 - math.exp(-5), rel=1e-5)
        assert l2 < np.inf

    def test_weight_spec(self):
        assert weight_from_spec({"type": "exp_window", "rate": 1, "t_max": 5}) == A_EXP
        with pytest.raises(ConfigParse):
            weight_from_spec({"type": "boxcar"})


class TestTransform:
    grid = FrequencyGrid(math.pi / 0.01, 8192)

    def value_at_zero(self, a, pattern):
        A = weight_transform(a, pattern, self.grid, dt=0.01)
        return A[self.grid.n // 2]

    def test_no_gap(self):
        assert self.value_at_zero(A_EXP, MissingPattern()).real == pytest.approx(1 - math.exp(-5), abs=1e-4)

    def test_gap(self):
        expected = (1 - math.exp(-5)) - (math.exp(-2) - math.exp(-3))
        assert self.value_at_zero(A_EXP, GAP1).real == pytest.approx(expected, abs=1e-4)

    def test_zero_weight(self):
        A = weight_transform(ExpWindow(1.0, 0.0), GAP1, self.grid)
        assert np.all(A == 0)

    def test_conjugate_symmetry(self):
        A = weight_transform(A_EXP, GAP1, self.grid, dt=0.01)
        # lambda_m and lambda_{n-m} are mirror images
        assert np.max(np.abs(A[1:] - np.conj(A[1:][::-1]))) <= 1e-10

    def test_matches_problem_transform(self, small):
        A = weight_transform(A_EXP, GAP1, small.freq, target=small.target)
        np.testing.assert_allclose(A, small.transform, atol=1e-12)


class TestBuildProblem:
    def test_cutoff_snapped(self, p1):
        assert p1.freq.cutoff == pytest.approx(math.pi / 0.05)
        assert p1.cutoff_requested == 64.0
        assert p1.target.dt <= math.pi / p1.freq.cutoff + 1e-15

    def test_period_check(self):
        with pytest.raises(ValidationError):
            build_problem(GAP1, A_EXP, dt=0.05, horizon=8, obs_horizon=12, n_freq=256)

    def test_default_horizons(self):
        p = build_problem(GAP1, A_EXP, dt=0.1, n_freq=2048)
        assert p.target.horizon == pytest.approx(10.0)
        assert p.obs_horizon == pytest.approx(8.0)

    def test_observation_grid_avoids_gap(self, p1):
        assert not GAP1.in_gaps(p1.obs_times).any()
        assert p1.obs_times.max() == 0.0
