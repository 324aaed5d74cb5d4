import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from ntk_lab.errors import BracketFailure, DomainError, NotSorted, TooSmall
from ntk_lab.kernels import KernelSpec, g_alpha_matrix, gram
from ntk_lab.spectral import (
    _bisect,
    decay_report,
    empirical_mercer,
    g_alpha_inverse,
    h_omega,
    mercer_spectrum,
    min_eigenvalue,
    sandwich_check,
    spectrum_report,
    uniform_grid,
)

PI3 = math.pi**3


def _root_oracle(alpha, j):
    """Root of h via brentq on the stated bracket."""
    if j == 1:
        lo, hi = math.pi / 6, math.pi / 2
    elif j % 2 == 0:
        return (j - 1) * math.pi
    else:
        lo, hi = (j - 1) * math.pi, (j - 0.5) * math.pi
    return brentq(lambda w: h_omega(alpha, w), lo, hi, xtol=1e-15, rtol=1e-15)


class TestMinEigenvalue:
    def test_equispaced_four(self):
        x = np.linspace(0, math.pi, 4)
        lam = min_eigenvalue(gram(KernelSpec.g_alpha(1.0), x))
        assert 1 / 6 <= lam <= 2 / 3

    def test_single_point(self):
        assert min_eigenvalue(gram(KernelSpec.g_alpha(1.0), [0.2])) == pytest.approx(1.0)

    def test_three_point_ntk1(self):
        g = gram(KernelSpec.ntk1(), [0.0, 0.5, 1.0]).matrix
        # characteristic polynomial roots as an independent oracle
        coeffs = np.poly(g)
        ref = np.sort(np.roots(coeffs).real)[0]
        assert min_eigenvalue(gram(KernelSpec.ntk1(), [0.0, 0.5, 1.0])) == pytest.approx(ref, rel=1e-8)


class TestInverse:
    @pytest.mark.parametrize("alpha", [1.0, 9 / 7])
    @pytest.mark.parametrize("seed", range(5))
    def test_random_designs(self, alpha, seed):
        rng = np.random.default_rng(seed)
        x = np.sort(rng.uniform(0, math.pi, rng.integers(3, 65)))
        g = g_alpha_matrix(alpha, x, x)
        inv = g_alpha_inverse(alpha, x)
        assert np.max(np.abs(g @ inv - np.eye(x.size))) <= 1e-8
        np.testing.assert_allclose(inv, np.linalg.inv(g), rtol=1e-7, atol=1e-8)

    def test_gershgorin_bound(self):
        x = np.linspace(0, math.pi, 8)
        inv = g_alpha_inverse(1.0, x)
        d_min = math.pi / 7
        assert np.max(np.abs(inv).sum(axis=1)) <= 2 * math.pi / d_min * (1 + 1e-12)
        assert np.array_equal(inv, inv.T)

    def test_errors(self):
        with pytest.raises(TooSmall):
            g_alpha_inverse(1.0, [0.0, 1.0])
        with pytest.raises(NotSorted):
            g_alpha_inverse(1.0, [0.0, 2.0, 1.0])


class TestRoots:
    def test_h_values(self):
        assert h_omega(1.0, math.pi) == pytest.approx(0.0, abs=1e-14)
        assert h_omega(1.0, 0.0) == 4.0
        ref = 2 + math.sqrt(3) - (2 * math.pi - 1) * math.pi / 12
        assert h_omega(1.0, math.pi / 6) == pytest.approx(ref, abs=1e-14)
        assert h_omega(1.0, math.pi / 6) == pytest.approx(2.3489161285, abs=1e-10)

    def test_known_eigenvalues(self):
        sp = mercer_spectrum(1.0, 4)
        # 2 / pi^3 and 2 / (9 pi^3)
        assert sp.eigenvalues[1] == pytest.approx(0.0645030688664, rel=1e-11)
        assert sp.eigenvalues[3] == pytest.approx(0.0071670076518, rel=1e-11)
        assert 8 / PI3 <= sp.eigenvalues[0] <= 72 / PI3

    @pytest.mark.parametrize("alpha", [1.0, 9 / 7])
    def test_matches_brentq(self, alpha):
        sp = mercer_spectrum(alpha, 40)
        ref = np.array([_root_oracle(alpha, j) for j in range(1, 41)])
        np.testing.assert_allclose(sp.roots, ref, rtol=1e-12)
        assert sp.bracket_guaranteed

    def test_even_exact(self):
        sp = mercer_spectrum(1.0, 40)
        j = np.arange(2, 41, 2)
        np.testing.assert_allclose(sp.eigenvalues[j - 1], 2 / PI3 / (j - 1.0) ** 2, rtol=1e-12)

    def test_odd_inside_bracket(self):
        sp = mercer_spectrum(9 / 7, 41)
        for j in range(3, 42, 2):
            assert (j - 1) * math.pi < sp.roots[j - 1] < (j - 0.5) * math.pi

    def test_unbracketed_alpha_warns(self):
        with pytest.warns(UserWarning):
            sp = mercer_spectrum(1.5, 3)
        assert not sp.bracket_guaranteed

    def test_bisect_no_sign_change(self):
        with pytest.raises(BracketFailure):
            _bisect(lambda w: 1.0 + w * w, 0.0, 1.0)

    def test_mercer_matches_integral_operator(self):
        # check the eigenpair directly: the operator of G_1 on [0, 1] applied to
        # cos(omega (x - 1/2)) (even eigenfunction) reproduces lambda times it
        sp = mercer_spectrum(1.0, 3)
        w, lam = sp.roots[0], sp.eigenvalues[0]
        x = np.linspace(0, 1, 20001)
        phi = np.cos(w * (x - 0.5))
        op = np.trapezoid(g_alpha_matrix(1.0, x[::400], x) * phi, x, axis=1)
        np.testing.assert_allclose(op, lam * phi[::400], atol=1e-6)


class TestEmpirical:
    def test_grid(self):
        np.testing.assert_array_equal(uniform_grid(3), [0, 0.5, 1])
        np.testing.assert_array_equal(uniform_grid(1), [0.0])

    def test_single(self):
        assert empirical_mercer(KernelSpec.ntk1(), 1, 1)[0] == pytest.approx(3.0)

    def test_g1_second_eigenvalue(self):
        lam = empirical_mercer(KernelSpec.g_alpha(1.0), 2000, 5)
        assert lam[1] == pytest.approx(2 / PI3, rel=0.02)

    def test_ntk1_bounded_by_g_spectra(self):
        lam = empirical_mercer(KernelSpec.ntk1(), 2000, 20)
        lo = mercer_spectrum(1.0, 20).eigenvalues
        hi = 7 * mercer_spectrum(9 / 7, 20).eigenvalues
        assert np.all(lam >= 0.95 * lo)
        assert np.all(lam <= 1.05 * hi)

    def test_j_max_range(self):
        with pytest.raises(DomainError):
            empirical_mercer(KernelSpec.ntk1(), 4, 5)


class TestSandwich:
    def test_equispaced(self):
        assert sandwich_check(np.linspace(0, 1, 16)) == (True, True)

    def test_single_point(self):
        assert sandwich_check([0.0]) == (True, True)

    def test_outside_unit_interval(self):
        with pytest.raises(DomainError):
            sandwich_check([0.0, 1.5])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 32))
    def test_random_sets(self, seed, n):
        x = np.random.default_rng(seed).uniform(0, 1, n)
        if n > 1 and np.min(np.diff(np.sort(x))) <= 1e-9:
            return
        assert sandwich_check(x) == (True, True)


class TestDecay:
    def test_exact_power(self):
        j = np.arange(1, 41.0)
        assert decay_report(j**-2.0, 2, 40) == pytest.approx(-2.0, abs=1e-12)

    def test_root_index_abscissa(self):
        lam = mercer_spectrum(1.0, 40).eigenvalues
        assert -2.02 <= decay_report(lam, 2, 40, index_offset=1) <= -1.98

    def test_empirical_root_index_abscissa(self):
        lam = empirical_mercer(KernelSpec.ntk1(), 2000, 40)
        assert -2.15 <= decay_report(lam, 2, 40, index_offset=1) <= -1.85

    def test_bad_range(self):
        with pytest.raises(DomainError):
            decay_report(np.ones(5), 1, 4)
        with pytest.raises(DomainError):
            decay_report(np.ones(5), 2, 6)


def test_spectrum_report():
    rep = spectrum_report(KernelSpec.ntk1(), np.linspace(0, 1, 64))
    assert rep.n == 64
    assert rep.sandwich_ok is True
    assert rep.lambda_min > 0
    assert rep.d_min == pytest.approx(1 / 63)
