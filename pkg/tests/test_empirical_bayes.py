import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cme.channel import GaussianPrior, ScalarChannel, two_point, uniform_atoms
from cme.empirical_bayes import (
    EbSchedule,
    KdeModel,
    SampleSet,
    consistency_experiment,
    draw_samples,
    eb_conditional_cumulant,
    eb_conditional_moment,
    kde_density,
)
from cme.errors import DomainError, ScheduleError
from cme.identities import conditional_cumulant, hermite_moment, moment_via_generalized_tre
from cme.lanczos import LanczosOperator


def phi(z):
    return np.exp(-0.5 * np.asarray(z) ** 2) / math.sqrt(2 * math.pi)


def model(points, a=1.0, s2=1.0):
    return KdeModel(SampleSet(np.asarray(points, dtype=float), s2), a)


class TestSamples:
    def test_needs_two(self):
        with pytest.raises(DomainError):
            SampleSet(np.array([1.0]), 1.0)

    def test_reproducible(self, binary):
        a = draw_samples(binary, 100, seed=5)
        b = draw_samples(binary, 100, seed=5)
        c = draw_samples(binary, 100, seed=6)
        assert np.array_equal(a.y, b.y)
        assert not np.array_equal(a.y, c.y)
        assert a.seed == 5

    def test_immutable(self, binary):
        s = draw_samples(binary, 10, seed=1)
        with pytest.raises(ValueError):
            s.y[0] = 0.0

    def test_bandwidth_positive(self):
        with pytest.raises(DomainError):
            model([0.0, 1.0], a=0.0)


class TestKde:
    def test_single_location(self):
        m = model([0.0, 0.0, 0.0])
        y = np.linspace(-3, 3, 13)
        assert np.allclose(kde_density(m, y), phi(y), rtol=1e-14)
        assert kde_density(m, 0.0, 1) == 0.0

    def test_two_samples(self):
        assert kde_density(model([-1.0, 1.0]), 0.0) == pytest.approx(float(phi(1.0)), rel=1e-14)

    def test_integrates_to_one(self):
        from scipy.integrate import quad

        rng = np.random.default_rng(0)
        m = model(rng.normal(size=50), a=0.3)
        assert quad(lambda t: kde_density(m, t), -12, 12, limit=200)[0] == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("r", range(1, 5))
    def test_derivatives_match_differences(self, r):
        rng = np.random.default_rng(r)
        m = model(rng.normal(size=40), a=0.5)
        y = np.linspace(-2, 2, 17)
        h = 1e-4
        prev = lambda t: kde_density(m, t, r - 1)
        fd = (prev(y + h) - prev(y - h)) / (2 * h)
        exact = kde_density(m, y, r)
        assert np.all(np.abs(fd - exact) <= 1e-6 * (1 + np.abs(exact)) * max(1.0, np.max(np.abs(exact))))

    def test_order_limit(self):
        with pytest.raises(DomainError):
            kde_density(model([0.0, 1.0]), 0.0, 9)

    @given(st.floats(-30, 30))
    def test_nonnegative(self, y):
        assert kde_density(model([-1.0, 0.5, 2.0], a=0.2), y) >= 0


class TestPlugIn:
    def test_robbins_form(self):
        rng = np.random.default_rng(4)
        m = model(rng.normal(size=200), a=0.4)
        y = np.linspace(-2, 2, 9)
        expect = y + m.sigma2 * kde_density(m, y, 1) / kde_density(m, y)
        assert np.allclose(eb_conditional_moment(m, 1, y), expect, atol=1e-12)

    @pytest.mark.parametrize("k", range(1, 5))
    def test_true_density_gives_exact_moments(self, three_atoms, k):
        y = np.linspace(-4, 4, 33)
        ratios = three_atoms.density_ratios(y, k)
        got = hermite_moment(ratios, k, y, three_atoms.sigma2)
        assert np.allclose(got, moment_via_generalized_tre(three_atoms, k, y), atol=1e-10)

    @pytest.mark.parametrize("k", [1, 2])
    def test_true_mean_gives_cumulants(self, three_atoms, k):
        from cme.identities import tre_mean
        from cme.lanczos import alpha

        h = 0.05
        y = np.linspace(-3, 3, 13)
        est = three_atoms.sigma2**k * LanczosOperator(k, h)(lambda t: tre_mean(three_atoms, t), y)
        err = np.max(np.abs(est - conditional_cumulant(three_atoms, k + 1, y)))
        # M bounds |d^{k+2} E[X|Y]| on the grid, sampled finely
        from cme.identities import ce_derivatives

        M = np.max(np.abs(ce_derivatives(three_atoms, np.linspace(-3.1, 3.1, 2001), k + 2)[k + 2]))
        assert err <= three_atoms.sigma2**k * alpha(k) * M * h * h

    def test_moment_near_truth(self):
        ch = ScalarChannel(two_point(0.5), 1.0)
        sched = EbSchedule(1, 0.1, 0.05)
        n = 100_000
        vals = [eb_conditional_moment(KdeModel(draw_samples(ch, n, s), sched.bandwidth(n)), 1, 0.5) for s in range(20)]
        assert abs(np.median(vals) - math.tanh(0.5)) <= 0.05

    def test_gaussian_second_cumulant(self):
        ch = ScalarChannel(GaussianPrior(0.0, 1.0), 1.0)
        n = 100_000
        vals = []
        for s in range(5):
            m = KdeModel(draw_samples(ch, n, s), 0.3)
            vals.append(eb_conditional_cumulant(m, 1, np.array([-0.5, 0.0, 0.5]), 0.5))
        assert np.allclose(np.median(vals, axis=0), 0.5, atol=0.05)

    def test_third_cumulant_sign_pattern(self):
        ch = ScalarChannel(uniform_atoms([-3.0, 0.0, 3.0]), 1.0)
        y = np.array([-1.5, -1.0, 1.0, 1.5])
        truth = conditional_cumulant(ch, 3, y)
        n = 200_000
        vals = [eb_conditional_cumulant(KdeModel(draw_samples(ch, n, s), 0.2), 2, y, 0.6) for s in range(5)]
        assert np.array_equal(np.sign(np.median(vals, axis=0)), np.sign(truth))


class TestSchedule:
    @pytest.mark.parametrize("u,w", [(0.0, 0.0), (1 / 6, 0.05), (0.1, 0.1), (0.1, 0.0), (0.1, -0.01)])
    def test_parameter_ranges(self, u, w):
        with pytest.raises(ScheduleError):
            EbSchedule(1, u, w)

    def test_order(self):
        with pytest.raises(ScheduleError):
            EbSchedule(0, 0.05, 0.01)

    def test_derived_quantities(self):
        s = EbSchedule(1, 0.1, 0.05, 1.0, cumulant=True)
        n = 10_000
        assert s.bandwidth(n) == pytest.approx(n**-0.1)
        assert s.window(n) == pytest.approx(math.sqrt(0.05 * math.log(n)) / 3)
        eps = 2 * n**-0.1 * math.sqrt(8 / (3 * math.pi))
        assert s.epsilon(n) == pytest.approx(eps)
        assert s.step(n) == pytest.approx(eps ** (1 / 3))

    def test_moment_schedule_has_no_step(self):
        s = EbSchedule(1, 0.1, 0.05)
        assert s.step(1000) is None
        assert s.check(1000)

    def test_inadmissible_fails_loudly(self):
        s = EbSchedule(1, 0.1, 0.05, cumulant=True)
        with pytest.raises(ScheduleError):
            s.check(100_000)
        relaxed = EbSchedule(1, 0.1, 0.05, cumulant=True, strict=False)
        assert relaxed.check(100_000) is False

    @given(st.integers(1, 4), st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.integers(100, 10**7))
    def test_admitted_runs_respect_window(self, k, fu, fw, n):
        u = fu / (2 * k + 4)
        s = EbSchedule(k, u, fw * u, cumulant=True, strict=False)
        if s.check(n):
            assert s.step(n) <= s.window(n) / 2


class TestExperiment:
    def test_single_row(self, binary):
        res = consistency_experiment(binary, 1, [1000], [0], 0.1, 0.05)
        assert len(res.rows) == 1
        assert res.rows[0].n == 1000 and res.rows[0].seed == 0
        assert math.isnan(res.slope())

    def test_unknown_kind(self, binary):
        with pytest.raises(DomainError):
            consistency_experiment(binary, 1, [1000], [0], 0.1, 0.05, kind="variance")

    def test_strict_cumulant_run_refused(self, binary):
        with pytest.raises(ScheduleError):
            consistency_experiment(binary, 1, [100_000], [0], 0.1, 0.05, kind="cumulant")

    def test_thread_count_does_not_change_results(self, binary, monkeypatch):
        monkeypatch.setenv("CME_THREADS", "1")
        a = consistency_experiment(binary, 1, [1000, 2000], [0, 1], 0.1, 0.05)
        monkeypatch.setenv("CME_THREADS", "4")
        b = consistency_experiment(binary, 1, [1000, 2000], [0, 1], 0.1, 0.05)
        key = lambda r: (r.n, r.seed, r.sup_error, r.t_n, r.a)
        assert [key(r) for r in a.rows] == [key(r) for r in b.rows]
        assert set(a.quantiles()) == {1000, 2000}
