import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cme.channel import ScalarChannel, two_point
from cme.errors import DomainError
from cme.lanczos import (
    LanczosErrorBudget,
    LanczosOperator,
    alpha,
    beta,
    choose_step,
    double_factorial,
    lanczos_constant,
    lanczos_derivative,
)


def test_constants():
    assert double_factorial(7) == 105
    assert double_factorial(0) == 1
    assert lanczos_constant(1) == 1.5
    # (1/2) sqrt(2^{2n+2}/pi) Gamma(n+3/2)
    for n in range(1, 9):
        ref = 0.5 * math.sqrt(2 ** (2 * n + 2) / math.pi) * math.gamma(n + 1.5)
        assert lanczos_constant(n) == pytest.approx(ref, rel=1e-13)


def test_validation():
    with pytest.raises(DomainError):
        LanczosOperator(0, 0.1)
    with pytest.raises(DomainError):
        LanczosOperator(1, 0.0)
    with pytest.raises(DomainError):
        choose_step(2, -1.0)


@given(st.floats(0.01, 2.0), st.floats(-5, 5))
def test_exact_on_quadratic(h, x):
    op = LanczosOperator(1, h)
    assert lanczos_derivative(lambda t: t * t, op, x) == pytest.approx(2 * x, abs=1e-9 * (1 + abs(x)))


@pytest.mark.parametrize("n", range(1, 6))
def test_exact_on_degree_n_plus_one(n):
    rng = np.random.default_rng(n)
    c = rng.normal(size=n + 2)
    p = np.polynomial.Polynomial(c)
    dp = p.deriv(n)
    op = LanczosOperator(n, 0.3)
    x = np.linspace(-1, 1, 5)
    assert np.allclose(op(p, x), dp(x), atol=1e-9)


def test_sin_second_derivative():
    assert abs(LanczosOperator(2, 0.01)(np.sin, 0.0)) < 1e-6


def test_tanh_smoothing_ratio():
    ch = ScalarChannel(two_point(0.5), 1.0)
    y = np.linspace(-5, 5, 401)
    err = {}
    for h in (0.5, 0.1):
        est = y + LanczosOperator(1, h)(ch.log_density, y)
        err[h] = np.max(np.abs(est - np.tanh(y)))
    assert 20 <= err[0.5] / err[0.1] <= 25


@pytest.mark.parametrize("n", range(1, 5))
def test_second_order_accuracy(n):
    hs = np.array([0.2, 0.1, 0.05, 0.025])
    errs = [abs(LanczosOperator(n, h)(np.exp, 0.3) - math.exp(0.3)) for h in hs]
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.1)


@pytest.mark.parametrize("k", range(1, 5))
def test_bias_bound(k):
    x = np.linspace(-1, 1, 21)
    for h in (0.4, 0.2, 0.1):
        err = np.max(np.abs(LanczosOperator(k, h)(np.exp, x) - np.exp(x)))
        M = math.exp(1 + h)
        assert err <= LanczosErrorBudget(k, M).bound(h)


@pytest.mark.parametrize("k", range(1, 4))
def test_noise_bound(k):
    rng = np.random.default_rng(10 + k)
    eps = 1e-6
    x = np.linspace(-1, 1, 11)
    for h in (0.3, 0.1):
        noisy = lambda t: np.exp(t) + eps * rng.uniform(-1, 1, size=np.shape(t))
        err = np.max(np.abs(LanczosOperator(k, h)(noisy, x) - np.exp(x)))
        assert err <= LanczosErrorBudget(k, math.exp(1 + h), eps).bound(h)


def test_beta_is_scaled_alpha():
    for k in range(1, 6):
        assert beta(k) == pytest.approx(math.factorial(k + 2) * alpha(k))
    # a perturbation never does more than c_k * int |P_k| / h^k
    t, w = np.polynomial.legendre.leggauss(200)
    for k in range(1, 6):
        l1 = np.dot(w, np.abs(np.polynomial.legendre.legval(t, [0] * k + [1])))
        assert lanczos_constant(k) * l1 <= beta(k)


def test_choose_step_examples():
    assert choose_step(2, 1e-6) == pytest.approx(10 ** (-1.5))
    assert choose_step(3, 0.0, default=0.25) == 0.25
    assert choose_step(1, 1e-3) == pytest.approx(0.1)


def test_vectorised_shapes():
    op = LanczosOperator(2, 0.1)
    x = np.zeros((3, 4))
    assert op(np.cos, x).shape == (3, 4)
    assert isinstance(op(np.cos, 0.0), float)
