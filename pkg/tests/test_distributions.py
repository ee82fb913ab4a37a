import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from cme.analytic import ce_inverse_eval
from cme.channel import GaussianPrior, ScalarChannel, two_point, uniform_atoms
from cme.distributions import (
    ErrorLaw,
    EstimatorLaw,
    LinearEstimator,
    binary_error_pdf,
    binary_linear_error_pdf,
    error_moment,
    error_pdf,
    estimator_cdf,
    estimator_mass,
    estimator_pdf,
    estimator_range,
    matched_estimator,
    mismatched_estimator,
    normal_pdf,
)
from cme.errors import DomainError, RangeError
from cme.mmse import mmse_exact

FIVE = uniform_atoms([-6.0, -3.0, 0.0, 3.0, 6.0])


class TestEstimatorLaw:
    @pytest.mark.parametrize("s2", [0.5, 1.0, 3.0])
    def test_gaussian(self, s2):
        ch = ScalarChannel(GaussianPrior(0.0, 1.0), s2)
        x = np.linspace(-2, 2, 21)
        v = 1 / (1 + s2)
        assert np.allclose(estimator_pdf(ch, x), normal_pdf(x, v), rtol=1e-10)
        assert estimator_pdf(ch, 0.0) == pytest.approx(math.sqrt((1 + s2) / (2 * math.pi)))

    def test_two_point_form(self, binary):
        x = np.linspace(-0.95, 0.95, 39)
        y = np.arctanh(x)
        assert np.allclose(estimator_pdf(binary, x), binary.density(y) / (1 - x * x), rtol=1e-10)

    @given(st.floats(-5.9, 5.9))
    def test_symmetry(self, x):
        ch = ScalarChannel(FIVE, 1.0)
        assert estimator_pdf(ch, x) == pytest.approx(estimator_pdf(ch, -x), rel=1e-8, abs=1e-300)

    def test_range_errors(self, binary):
        for x in (-1.0, 1.0, 2.0):
            with pytest.raises(RangeError):
                estimator_pdf(binary, x)
            with pytest.raises(RangeError):
                estimator_cdf(binary, x)

    @pytest.mark.parametrize("prior", [two_point(0.5), two_point(0.2), FIVE, GaussianPrior(0.5, 2.0)])
    def test_mass(self, prior):
        assert estimator_mass(ScalarChannel(prior, 1.0)) == pytest.approx(1.0, abs=1e-6)

    def test_grid_law(self):
        law = EstimatorLaw.on_grid(ScalarChannel(FIVE, 1.0), 401)
        assert np.all(law.pdf >= 0)
        assert np.all(np.diff(law.cdf) >= 0)
        assert law.total_mass() == pytest.approx(1.0, abs=1e-3)

    @pytest.mark.parametrize("prior", [FIVE, two_point(0.5), two_point(0.2)])
    def test_cdf_limits(self, prior):
        # X_hat approaches a bounded endpoint exponentially fast in y, so the
        # cdf only vanishes once the offset is near float resolution
        ch = ScalarChannel(prior, 1.0)
        lo, hi = estimator_range(ch)
        width = hi - lo
        assert estimator_cdf(ch, lo + 1e-12 * width) <= 1e-6
        assert estimator_cdf(ch, hi - 1e-12 * width) >= 1 - 1e-6
        inner = estimator_cdf(ch, np.linspace(lo + 1e-12 * width, hi - 1e-12 * width, 101))
        assert np.all(np.diff(inner) >= 0)

    def test_cdf_matches_pdf(self, three_atoms):
        a, b = -1.0, 0.7
        val = quad(lambda x: estimator_pdf(three_atoms, x), a, b, limit=200)[0]
        assert val == pytest.approx(estimator_cdf(three_atoms, b) - estimator_cdf(three_atoms, a), abs=1e-9)

    def test_monte_carlo(self, three_atoms):
        rng = np.random.default_rng(7)
        n = 200_000
        y = three_atoms.prior.sample(rng, n) + rng.normal(size=n)
        from cme.identities import tre_mean

        xh = tre_mean(three_atoms, y)
        for q in (-1.2, 0.0, 0.8):
            emp = np.mean(xh <= q)
            assert abs(emp - estimator_cdf(three_atoms, q)) <= 4 * math.sqrt(0.25 / n)


class TestErrorLaw:
    @pytest.mark.parametrize("p", [0.2, 0.5, 0.7])
    @pytest.mark.parametrize("s2", [0.5, 1.0])
    def test_binary_closed_form(self, p, s2):
        ch = ScalarChannel(two_point(p), s2)
        w = np.concatenate([np.linspace(-1.99, -0.01, 50), np.linspace(0.01, 1.99, 50)])
        got = error_pdf(ch, matched_estimator(ch), w)
        assert np.allclose(got, binary_error_pdf(w, p, s2), rtol=1e-9, atol=1e-300)

    def test_symmetric_support(self, binary):
        w = np.linspace(-2.5, 2.5, 101)
        f = error_pdf(binary, matched_estimator(binary), w)
        assert np.allclose(f, f[::-1], rtol=1e-9)
        assert np.all(f[np.abs(w) >= 2] == 0)

    @pytest.mark.parametrize("q", [0.3, 0.8])
    def test_mismatched_two_point(self, q):
        ch = ScalarChannel(two_point(0.5), 1.0)
        g = mismatched_estimator(two_point(q), 1.0)
        w = np.linspace(-1.9, 1.9, 77)
        w = w[np.abs(w) > 1e-9]
        assert np.allclose(error_pdf(ch, g, w), binary_error_pdf(w, 0.5, 1.0, q), rtol=1e-9, atol=1e-300)

    def test_mismatched_linear(self):
        ch = ScalarChannel(two_point(0.3), 1.0)
        g = LinearEstimator(0.5)
        w = np.linspace(-4, 4, 81)
        assert np.allclose(error_pdf(ch, g, w), binary_linear_error_pdf(w, 0.3, 1.0), rtol=1e-12)

    def test_mismatched_gaussian_q_is_linear(self):
        ch = ScalarChannel(two_point(0.3), 1.0)
        g = mismatched_estimator(GaussianPrior(0.0, 1.0), 1.0)
        w = np.linspace(-4, 4, 41)
        assert np.allclose(error_pdf(ch, g, w), binary_linear_error_pdf(w, 0.3, 1.0), rtol=1e-8)

    def test_constant_estimator_rejected(self):
        with pytest.raises(DomainError):
            LinearEstimator(0.0)

    @pytest.mark.parametrize("prior", [two_point(0.5), two_point(0.2), FIVE])
    def test_normalisation_and_orthogonality(self, prior):
        ch = ScalarChannel(prior, 1.0)
        g = matched_estimator(ch)
        assert error_moment(ch, g, 0) == pytest.approx(1.0, abs=1e-5)
        assert abs(error_moment(ch, g, 1)) <= 1e-5

    @pytest.mark.parametrize("prior", [two_point(0.5), FIVE])
    def test_second_moment_is_mmse(self, prior):
        ch = ScalarChannel(prior, 1.0)
        assert error_moment(ch, matched_estimator(ch), 2) == pytest.approx(mmse_exact(ch), abs=1e-4)

    def test_gaussian_prior(self, gaussian):
        # W ~ N(0, sigma2/(1+sigma2))
        w = np.linspace(-2, 2, 9)
        got = error_pdf(gaussian, matched_estimator(gaussian), w)
        assert np.allclose(got, normal_pdf(w, 0.5), rtol=1e-7)

    def test_grid_law(self, binary):
        w = np.linspace(-2, 2, 81)
        law = ErrorLaw.on_grid(binary, matched_estimator(binary), w)
        assert np.all(law.pdf >= 0)

    def test_monte_carlo(self):
        ch = ScalarChannel(FIVE, 1.0)
        rng = np.random.default_rng(11)
        n = 200_000
        x = FIVE.sample(rng, n)
        from cme.identities import tre_mean

        wv = x - tre_mean(ch, x + rng.normal(size=n))
        g = matched_estimator(ch)
        for a, b in [(-1.0, -0.2), (-0.2, 0.3), (0.5, 2.0)]:
            p = quad(lambda t: error_pdf(ch, g, t), a, b, limit=200)[0]
            emp = np.mean((wv > a) & (wv <= b))
            assert abs(emp - p) <= 4 * math.sqrt(p * (1 - p) / n) + 1e-4
