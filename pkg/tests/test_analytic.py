import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cme.analytic import (
    InverseSeries,
    MAX_SERIES_ORDER,
    PowerSeries,
    ce_inverse_eval,
    ce_range,
    ce_series,
    lagrange_invert,
    series_inverse_eval,
    two_point_inverse,
    two_point_mean,
)
from cme.channel import GaussianPrior, ScalarChannel, two_point, uniform_atoms
from cme.errors import DomainError, NumericError, RangeError
from cme.identities import tre_mean


def tanh_taylor(K):
    # tanh y = sum 2^{2n}(2^{2n}-1) B_{2n} y^{2n-1} / (2n)!
    from scipy.special import bernoulli

    B = bernoulli(K + 2)
    c = np.zeros(K + 1)
    for n in range(1, K // 2 + 2):
        if 2 * n - 1 <= K:
            c[2 * n - 1] = 4**n * (4**n - 1) * B[2 * n] / math.factorial(2 * n)
    return c


class TestForwardSeries:
    def test_tanh_coefficients(self, binary):
        s = ce_series(binary, 0.0, 10)
        assert np.allclose(s.coeffs, tanh_taylor(10), atol=1e-12)
        assert s.coeffs[3] == pytest.approx(-1 / 3)

    def test_radius_bound(self, binary):
        assert ce_series(binary, 0.0).radius_lower_bound == pytest.approx(1 / (2 * math.e))

    def test_order_validation(self, binary):
        with pytest.raises(DomainError):
            ce_series(binary, 0.0, MAX_SERIES_ORDER + 1)

    def test_accuracy_inside_half_radius(self, binary):
        s = ce_series(binary, 0.0, 10)
        r = 0.5 * s.radius_lower_bound
        y = np.linspace(-r, r, 101)
        assert np.max(np.abs(s(y) - tre_mean(binary, y))) <= 1e-4

    @pytest.mark.parametrize("a", [-1.0, 0.4, 2.0])
    def test_accuracy_off_origin(self, three_atoms, a):
        s = ce_series(three_atoms, a, 10)
        r = 0.5 * s.radius_lower_bound
        y = np.linspace(a - r, a + r, 41)
        assert np.max(np.abs(s(y) - tre_mean(three_atoms, y))) <= 1e-4

    def test_gaussian_is_linear(self, gaussian):
        s = ce_series(gaussian, 1.0, 6)
        assert s.coeffs[0] == pytest.approx(0.5)
        assert s.coeffs[1] == pytest.approx(0.5)
        assert np.max(np.abs(s.coeffs[2:])) < 1e-12
        assert s.radius_lower_bound is None

    def test_truncate(self, binary):
        s = ce_series(binary, 0.0, 10)
        assert s.truncate(3).order == 3


class TestLagrange:
    def test_linear(self):
        s2 = 1.0
        inv = lagrange_invert(PowerSeries(0.0, (0.0, 1 / (1 + s2), 0.0, 0.0)))
        assert inv.b[0] == pytest.approx(1 + s2)
        assert inv.b[1:] == (0.0, 0.0)

    def test_singular(self):
        with pytest.raises(NumericError):
            lagrange_invert(PowerSeries(0.0, (0.0, 0.0, 1.0)))
        with pytest.raises(DomainError):
            lagrange_invert(PowerSeries(0.0, (1.0,)))

    def test_known_inverse(self):
        # exp(y) - 1 inverts to log(1 + x)
        K = 10
        s = PowerSeries(0.0, tuple([0.0] + [1 / math.factorial(k) for k in range(1, K + 1)]))
        inv = lagrange_invert(s)
        for n in range(1, K + 1):
            assert inv.b[n - 1] == pytest.approx((-1) ** (n - 1) * math.factorial(n - 1), rel=1e-12)

    def test_composition_by_truncated_powers(self):
        rng = np.random.default_rng(3)
        K = 8
        c = np.concatenate([[0.2, 1.3], rng.normal(scale=0.3, size=K - 1)])
        s = PowerSeries(0.0, tuple(c))
        inv = lagrange_invert(s)
        # s(inv(x)) - x as a polynomial in (x - c0) must vanish up to degree K
        P = np.polynomial.Polynomial
        z = P([0.0] + [inv.b[n - 1] / math.factorial(n) for n in range(1, K + 1)])
        comp = sum(c[k] * z**k for k in range(K + 1))
        coef = comp.coef[: K + 1]
        expect = np.zeros(K + 1)
        expect[0], expect[1] = c[0], 1.0
        assert np.allclose(coef, expect, atol=1e-10)

    @pytest.mark.parametrize("p", [0.3, 0.5, 0.7])
    def test_two_point_closed_form(self, p):
        ch = ScalarChannel(two_point(p), 1.0)
        inv = lagrange_invert(ce_series(ch, 0.0, 10))
        assert inv.b[0] > 0
        radius = inv.trust_radius(lambda x: ce_inverse_eval(ch, x))
        assert radius > 0
        xs = inv.value + np.linspace(-radius / 2, radius / 2, 25)
        assert np.max(np.abs(inv(xs) - two_point_inverse(xs, p, 1.0))) <= 1e-6

    def test_round_trip(self, three_atoms):
        s = ce_series(three_atoms, 0.5, 10)
        inv = lagrange_invert(s)
        ys = 0.5 + np.linspace(-0.1, 0.1, 25)
        assert np.max(np.abs(inv(s(ys)) - ys)) <= 1e-6

    def test_inverse_series_vs_root_finder_in_trust_region(self, three_atoms):
        inv = lagrange_invert(ce_series(three_atoms, 0.0, 10))
        ref = lambda x: ce_inverse_eval(three_atoms, x)
        r = inv.trust_radius(ref, tol=1e-6)
        xs = np.linspace(-r, r, 31)
        assert np.max(np.abs(inv(xs) - ref(xs))) <= 1e-6

    def test_first_coefficient_is_inverse_slope(self, three_atoms):
        from cme.identities import conditional_cumulant

        inv = lagrange_invert(ce_series(three_atoms, 0.7, 4))
        assert inv.b[0] == pytest.approx(1.0 / conditional_cumulant(three_atoms, 2, 0.7))


class TestRootFinder:
    def test_examples(self, binary, gaussian):
        assert ce_inverse_eval(binary, math.tanh(1.0)) == pytest.approx(1.0, abs=1e-12)
        assert ce_inverse_eval(gaussian, 0.5) == pytest.approx(1.0, abs=1e-12)

    def test_range_errors(self, binary):
        for x in (1.0, -1.0, 1.5):
            with pytest.raises(RangeError):
                ce_inverse_eval(binary, x)

    def test_range(self, three_atoms, gaussian):
        assert ce_range(three_atoms) == (-2.0, 2.0)
        assert ce_range(gaussian) == (-math.inf, math.inf)

    def test_monotone_grid(self):
        ch = ScalarChannel(uniform_atoms([-6.0, -3.0, 0.0, 3.0, 6.0]), 1.0)
        xs = np.linspace(-5.9, 5.9, 301)
        ys = ce_inverse_eval(ch, xs)
        assert np.all(np.diff(ys) > 0)
        assert np.max(np.abs(tre_mean(ch, ys) - xs)) <= 1e-12

    @given(st.floats(-0.999, 0.999), st.floats(0.2, 3), st.floats(0.05, 0.95))
    def test_two_point_closed_form(self, x, s2, p):
        ch = ScalarChannel(two_point(p), s2)
        y = ce_inverse_eval(ch, x)
        assert two_point_mean(y, p, s2) == pytest.approx(x, abs=1e-11)

    def test_series_initialiser(self, three_atoms):
        inv = lagrange_invert(ce_series(three_atoms, 0.0, 8))
        xs = np.linspace(-1.5, 1.5, 11)
        assert np.allclose(ce_inverse_eval(three_atoms, xs, series=inv), ce_inverse_eval(three_atoms, xs), atol=1e-10)

    @pytest.mark.parametrize("name_prior", [uniform_atoms([-2.0, 0.0, 2.0]), GaussianPrior(0.3, 2.0)])
    def test_monotone_tre(self, name_prior):
        ch = ScalarChannel(name_prior, 0.8)
        y = np.linspace(-8, 8, 801)
        assert np.all(np.diff(tre_mean(ch, y)) > 0)


class TestSeriesInverseEval:
    def test_uses_series_near_anchor(self, binary):
        y, K = series_inverse_eval(binary, 0.05)
        assert K is not None
        assert abs(math.tanh(y) - 0.05) <= 1e-4

    def test_falls_back_far_away(self, binary):
        y, K = series_inverse_eval(binary, 0.99)
        assert K is None
        assert y == pytest.approx(math.atanh(0.99), abs=1e-10)


def test_inverse_series_scalar_call():
    inv = InverseSeries(1.0, 0.0, (2.0, 0.0))
    assert inv(0.5) == 2.0
    assert inv(0.5, K=1) == 2.0
