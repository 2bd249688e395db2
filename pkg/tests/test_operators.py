import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rfl.errors import IllConditioned, SingularDensitySum
from rfl.filtering import mse_quadratic
from rfl.operators import assemble, assemble_B, assemble_Q, assemble_R, fourier_matrix, solve_c
from rfl.problem import MissingPattern
from rfl.spectra import TWO_PI, eval_density

from .conftest import F_OU, G_OU2, p1_problem, rationals


def values(problem, *densities):
    return [eval_density(d, problem.freq) for d in densities]


@pytest.fixture(scope="module")
def p1_system(p1):
    f, g = values(p1, F_OU, G_OU2)
    t = p1.target
    return assemble(f, g, p1.fourier, p1.freq, t.weights, t.active, "mirrored", t.in_gaps)


class TestFourierMatrix:
    def test_unit_entries(self, small):
        E = fourier_matrix(small.target.times, small.freq)
        zero_col = np.flatnonzero(small.target.times == 0)[0]
        np.testing.assert_array_equal(E[:, zero_col], 1)
        np.testing.assert_array_equal(E[small.freq.n // 2], 1)
        np.testing.assert_allclose(np.abs(E), 1)


class TestAssembly:
    def test_constant_weight_is_gram(self, small):
        ones = np.ones(small.freq.n)
        w = small.target.weights
        E = small.fourier
        B = assemble_B(0.5 * ones, 0.5 * ones, E, small.freq, w)
        gram = small.freq.spacing / TWO_PI * (E.conj().T @ E) * w[None, :]
        np.testing.assert_allclose(B, gram, atol=1e-13)

    def test_hermitian_psd(self, p1_system):
        for M in (p1_system.B, p1_system.Q):
            norm = np.linalg.norm(M, 2)
            assert np.max(np.abs(M - M.conj().T)) <= 1e-12 * norm
            assert np.linalg.eigvalsh(M).min() >= -1e-10 * norm

    def test_r_proportional_without_gaps(self):
        p = p1_problem(dt=0.1, n_freq=2048, pattern=MissingPattern())
        k = 3.0
        half = np.full(p.freq.n, k / 2)
        w = p.target.weights
        B = assemble_B(half, half, p.fourier, p.freq, w)
        R = assemble_R(half, half, p.fourier, p.freq, w, kernel="as_printed")
        np.testing.assert_allclose(R, (k / 2) * B, atol=1e-13)

    def test_r_norm_bound(self, p1, p1_system):
        f = values(p1, F_OU)[0]
        assert np.linalg.norm(p1_system.R, 2) <= np.linalg.norm(p1_system.B, 2) * f.max() * (1 + 1e-10)

    def test_r_of_zero_weight(self, p1_system):
        assert np.all(p1_system.R @ np.zeros(p1_system.size) == 0)

    def test_q_zero_noise(self, small):
        f = values(small, F_OU)[0]
        Q = assemble_Q(f, np.zeros_like(f), small.fourier, small.freq, small.target.weights)
        assert np.all(Q == 0)

    def test_q_equal_densities(self, small):
        f = values(small, F_OU)[0]
        w = small.target.weights
        Q = assemble_Q(f, f, small.fourier, small.freq, w)
        # B with f' = 1/f and g' = 0 is the operator with spectral weight f
        Bf = assemble_B(1.0 / f, np.zeros_like(f), small.fourier, small.freq, w)
        np.testing.assert_allclose(Q, 0.5 * Bf, atol=1e-13)

    def test_singular_sum(self, small):
        z = np.zeros(small.freq.n)
        with pytest.raises(SingularDensitySum):
            assemble_B(z, z, small.fourier, small.freq, small.target.weights)

    def test_unknown_kernel(self, small):
        f = values(small, F_OU)[0]
        with pytest.raises(ValueError):
            assemble_R(f, f, small.fourier, small.freq, small.target.weights, kernel="flipped")

    @given(rationals(), rationals())
    def test_psd_random(self, f, g):
        p = _coarse()
        fv, gv = values(p, f, g)
        t = p.target
        for M in (assemble_B(fv, gv, p.fourier, p.freq, t.weights), assemble_Q(fv, gv, p.fourier, p.freq, t.weights)):
            norm = np.linalg.norm(M, 2)
            assert np.linalg.eigvalsh(M).min() >= -1e-10 * norm


_COARSE = []


def _coarse():
    if not _COARSE:
        _COARSE.append(p1_problem(dt=0.1, n_freq=2048))
    return _COARSE[0]


class TestSolve:
    def test_zero_weight(self, p1_system):
        r = solve_c(p1_system.B, p1_system.R, np.zeros(p1_system.size), p1_system.active)
        assert np.all(r.c == 0)

    def test_residual(self, p1, p1_system):
        r = solve_c(p1_system.B, p1_system.R, p1.ahat, p1_system.active)
        a = p1_system.active
        rhs = (p1_system.R @ p1.ahat)[a]
        assert np.linalg.norm(p1_system.B[np.ix_(a, a)] @ r.c[a] - rhs) <= 1e-8 * np.linalg.norm(rhs)
        assert r.c[~a] == 0
        assert not r.regularized

    def test_direct_matches_cg(self, p1, p1_system):
        d = solve_c(p1_system.B, p1_system.R, p1.ahat, p1_system.active, method="direct").c
        i = solve_c(p1_system.B, p1_system.R, p1.ahat, p1_system.active, method="cg").c
        assert np.max(np.abs(d - i)) <= 1e-6 * np.max(np.abs(d))

    def test_ridge_flag(self, small):
        f, g = values(small, F_OU, G_OU2)
        t = small.target
        s = assemble(f, g, small.fourier, small.freq, t.weights, t.active)
        r = solve_c(s.B, s.R, small.ahat, t.active, cond_max=1.0)
        assert r.regularized and r.ridge > 0

    def test_ill_conditioned(self):
        B = np.ones((4, 4), dtype=complex)
        R = np.eye(4, dtype=complex)
        with pytest.raises(IllConditioned):
            solve_c(B, R, np.array([1.0, -1.0, 0.0, 0.0]))

    @given(st.floats(0.1, 10.0))
    def test_scale_covariance(self, scale):
        p = _coarse()
        f, g = values(p, F_OU, G_OU2)
        t = p.target
        s1 = assemble(f, g, p.fourier, p.freq, t.weights, t.active, "mirrored", t.in_gaps)
        s2 = assemble(scale * f, scale * g, p.fourier, p.freq, t.weights, t.active, "mirrored", t.in_gaps)
        np.testing.assert_allclose(s2.B, s1.B / scale, rtol=1e-9, atol=1e-12 * np.abs(s1.B).max() / scale)
        np.testing.assert_allclose(s2.R, s1.R, rtol=1e-9, atol=1e-12 * np.abs(s1.R).max())
        np.testing.assert_allclose(s2.Q, scale * s1.Q, rtol=1e-9, atol=1e-12 * scale * np.abs(s1.Q).max())
        c1 = solve_c(s1.B, s1.R, p.ahat, t.active).c
        c2 = solve_c(s2.B, s2.R, p.ahat, t.active).c
        np.testing.assert_allclose(c2, scale * c1, rtol=1e-9, atol=1e-9 * scale * np.abs(c1).max())


def test_grid_refinement():
    out = []
    for dt, n in ((0.05, 8192), (0.025, 16384)):
        p = p1_problem(dt=dt, n_freq=n)
        f, g = values(p, F_OU, G_OU2)
        t = p.target
        s = assemble(f, g, p.fourier, p.freq, t.weights, t.active, "mirrored", t.in_gaps)
        c = solve_c(s.B, s.R, p.ahat, t.active).c
        out.append(mse_quadratic(p.ahat, s, c))
    assert abs(out[1] - out[0]) <= 1e-3 * abs(out[0])
