"""Information density ``i(x; y) = log f_{Y|X}(y|x) / f_Y(y)`` and its y-derivatives."""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .channel import LOG_SQRT_2PI, PosteriorOracle, Region, ScalarChannel
from .errors import DomainError, NumericError
from .identities import conditional_cumulants, hatsell_nolte_variance, tre_mean


def _out(arr):
    arr = np.asarray(arr, dtype=float)
    return arr if arr.ndim else float(arr)


def info_density(ch: ScalarChannel, x, y):
    """``log phi_{sigma2}(y - x) - log f_Y(y)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    log_lik = -0.5 * (y - x) ** 2 / ch.sigma2 - LOG_SQRT_2PI - 0.5 * math.log(ch.sigma2)
    log_f = np.asarray(ch.log_density(y))
    if not np.all(np.isfinite(log_f)):
        raise NumericError("output density underflowed")
    return _out(log_lik - log_f)


def info_density_dy(ch: ScalarChannel, x, y, k: int = 1):
    """``d^k/dy^k i(x; y)``.

    ``k = 1``: ``(x - E[X|Y=y]) / sigma2``; ``k >= 2``:
    ``-kappa_{X|Y=y}(k) / sigma2^k`` (independent of ``x``).
    """
    if k < 1:
        raise DomainError("derivative order must be >= 1")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if k == 1:
        return _out((x - np.asarray(tre_mean(ch, y))) / ch.sigma2)
    kappa = conditional_cumulants(ch, y, k)[k - 1]
    return _out(np.broadcast_to(-kappa / ch.sigma2**k, np.broadcast_shapes(x.shape, y.shape)))


def log_set_prob(ch: ScalarChannel, region: Region, y, oracle: PosteriorOracle = None):
    """``log P[X in A | Y = y]``."""
    oracle = oracle or PosteriorOracle(ch)
    return _out(np.log(oracle.posterior_set_probability(region, y)))


def log_set_prob_grad(ch: ScalarChannel, region: Region, y, oracle: PosteriorOracle = None):
    """``d/dy log P[X in A | Y = y] = (E[X|Y, X in A] - E[X|Y]) / sigma2``."""
    oracle = oracle or PosteriorOracle(ch)
    ma = np.asarray(oracle.posterior_moment_on_set(1, region, y))
    return _out((ma - np.asarray(tre_mean(ch, y))) / ch.sigma2)


def log_set_prob_hess(ch: ScalarChannel, region: Region, y, oracle: PosteriorOracle = None):
    """``d^2/dy^2 log P[X in A | Y = y] = (Var(X|Y, X in A) - Var(X|Y)) / sigma2^2``."""
    oracle = oracle or PosteriorOracle(ch)
    m1 = np.asarray(oracle.posterior_moment_on_set(1, region, y))
    m2 = np.asarray(oracle.posterior_moment_on_set(2, region, y))
    var_a = m2 - m1 * m1
    return _out((var_a - np.asarray(hatsell_nolte_variance(ch, y))) / ch.sigma2**2)


def _mills(beta):
    # phi(beta) / Phi(beta), stable for very negative beta
    return np.exp(-0.5 * beta**2 - LOG_SQRT_2PI - special.log_ndtr(beta))


def truncated_gaussian_terms(y, t: float, sigma2: float):
    """``beta(y)`` and ``phi(beta)/Phi(beta)`` for ``X ~ N(0,1)``, ``A = (-inf, t]``."""
    y = np.asarray(y, dtype=float)
    s_post = math.sqrt(sigma2 / (1.0 + sigma2))
    beta = (t - y / (1.0 + sigma2)) / s_post
    return beta, _mills(beta)


def truncated_gaussian_variance(y, t: float, sigma2: float):
    """``Var(X | Y = y, X <= t)`` for a standard Gaussian prior."""
    beta, r = truncated_gaussian_terms(y, t, sigma2)
    return _out(sigma2 / (1.0 + sigma2) * (1.0 - beta * r - r * r))


def truncated_gaussian_hess(y, t: float, sigma2: float):
    """Closed-form ``d^2/dy^2 log P[X <= t | Y = y]`` for ``X ~ N(0,1)``."""
    beta, r = truncated_gaussian_terms(y, t, sigma2)
    return _out(-(beta * r + r * r) / (sigma2 * (1.0 + sigma2)))
