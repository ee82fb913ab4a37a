"""Exact identities linking conditional moments and cumulants to ``f_Y``.

Every y-derivative here comes from the analytic density ratios
``f_Y^{(j)}/f_Y`` supplied by the channel, never from numerical
differentiation.  Independent routes to the same quantity (Bell form,
Hermite form, Taylor-jet recursion, posterior oracle) are kept separate
so the test-suite can cross-check them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .channel import DiscretePrior, GaussianPrior, PosteriorOracle, ScalarChannel
from .errors import CapabilityError, DomainError, NumericError
from .polybasis import MAX_ORDER, bell_complete, bell_partial, hermite_g, moments_to_cumulants


def _finite(arr, what: str):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{what} is not finite (density underflow?)")
    return arr


def _out(arr):
    arr = np.asarray(arr, dtype=float)
    return arr if arr.ndim else float(arr)


def _variance(s2: float, L2):
    """``s2 + s2^2 L_2``, floored at 0: the sum cancels to rounding noise in the tails."""
    return np.maximum(s2 + s2 * s2 * np.asarray(L2), 0.0)


def log_density_derivatives(ch: ScalarChannel, y, K: int) -> np.ndarray:
    """``L_j = (log f_Y)^{(j)}(y)`` for ``j = 1..K`` on axis 0."""
    if K > MAX_ORDER:
        raise CapabilityError(f"order {K} exceeds {MAX_ORDER}")
    return _finite(ch.log_density_derivatives(y, K), "log-density derivative")


# --------------------------------------------------------------------------
# First two conditional moments
# --------------------------------------------------------------------------


def tre_mean(ch: ScalarChannel, y):
    """``E[X | Y = y] = y + sigma2 f_Y'(y) / f_Y(y)``."""
    y = np.asarray(y, dtype=float)
    r = _finite(ch.density_ratios(y, 1), "score")
    return _out(y + ch.sigma2 * r[1])


def hatsell_nolte_variance(ch: ScalarChannel, y):
    """``Var(X | Y = y) = sigma2 * d/dy E[X | Y = y]``.

    The derivative of the TRE expression is ``1 + sigma2 (log f_Y)''``.
    """
    L = log_density_derivatives(ch, y, 2)
    return _out(_variance(ch.sigma2, L[1]))


def ce_derivatives(ch: ScalarChannel, y, K: int) -> np.ndarray:
    """``d^j/dy^j E[X | Y = y]`` for ``j = 0..K`` on axis 0."""
    y = np.asarray(y, dtype=float)
    L = log_density_derivatives(ch, y, K + 1)
    s2 = ch.sigma2
    out = s2 * L[: K + 1].copy()
    out[0] = out[0] + y
    if K >= 1:
        out[1] = _variance(s2, L[1]) / s2
    return out


# --------------------------------------------------------------------------
# Higher conditional moments
# --------------------------------------------------------------------------


def _jet_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Leibniz product of two derivative jets ``[g, g', g'', ...]``."""
    n = min(len(a), len(b))
    out = np.zeros((n,) + np.broadcast_shapes(a.shape[1:], b.shape[1:]))
    for j in range(n):
        for i in range(j + 1):
            out[j] += math.comb(j, i) * a[i] * b[j - i]
    return out


def moment_jets(ch: ScalarChannel, y, K: int) -> list:
    """Derivative jets of ``E[X^j | Y = y]`` for ``j = 0..K``.

    Iterates ``E[X^{j+1}|Y] = sigma2 d/dy E[X^j|Y] + E[X^j|Y] E[X|Y]`` on
    truncated Taylor jets; the jet of ``E[X^j|Y]`` keeps ``K - j + 1``
    derivatives, exactly what the remaining steps consume.
    """
    y = np.asarray(y, dtype=float)
    mean_jet = ce_derivatives(ch, y, max(K - 1, 0))
    jets = [np.concatenate([np.ones((1,) + y.shape), np.zeros((K,) + y.shape)])]
    for j in range(K):
        cur = jets[-1]
        nxt = ch.sigma2 * cur[1:] + _jet_mul(cur[:-1], mean_jet)
        jets.append(nxt)
    return jets


def jaffer_step(ch: ScalarChannel, k: int, y):
    """``E[X^{k+1} | Y = y]`` from one recursion step on ``E[X^k | Y]``."""
    if k < 0:
        raise DomainError("k must be >= 0")
    return _out(moment_jets(ch, y, k + 1)[k + 1][0])


def moment_via_bell(ch: ScalarChannel, k: int, y):
    """``sigma^{2k} B_k(E/sigma2, E'/sigma2, ..., E^{(k-1)}/sigma2)``."""
    if k < 1:
        raise DomainError("k must be >= 1")
    s2 = ch.sigma2
    d = ce_derivatives(ch, y, k - 1) / s2
    return _out(s2**k * bell_complete(k, list(d)))


def moment_via_generalized_tre(ch: ScalarChannel, k: int, y):
    """``sigma^{2k} sum_m C(k,m) f^{(k-m)} G_m(y/sigma) / sigma^m / f``."""
    if k < 1:
        raise DomainError("k must be >= 1")
    y = np.asarray(y, dtype=float)
    r = _finite(ch.density_ratios(y, k), "density ratio")
    return _out(hermite_moment(r, k, y, ch.sigma2))


def hermite_moment(ratios, k: int, y, sigma2: float):
    """Moment ``k`` from the stack of ratios ``f^{(j)}/f``, ``j = 0..k``.

    Shared by the exact identity and the empirical-Bayes plug-in.
    """
    s = math.sqrt(sigma2)
    t = np.asarray(y, dtype=float) / s
    acc = 0.0
    for m in range(k + 1):
        acc = acc + math.comb(k, m) * ratios[k - m] * hermite_g(m, t) / s**m
    return sigma2**k * acc


def ce_derivative(
    ch: ScalarChannel,
    k: int,
    y,
    moments: Optional[np.ndarray] = None,
    oracle: Optional[PosteriorOracle] = None,
):
    """``d^k/dy^k E[X | Y = y]`` from conditional moments.

    ``sigma2 * sum_m c_m B_{k+1,m}(E[X/sigma2|Y], ..., E[(X/sigma2)^{k-m+2}|Y])``
    with ``c_m = (-1)^{m-1} (m-1)!``.  Moments ``E[X^j|Y]``, ``j=1..k+1``,
    can be passed in; otherwise the posterior oracle supplies them.
    """
    if k < 0:
        raise DomainError("k must be >= 0")
    s2 = ch.sigma2
    if moments is None:
        oracle = oracle or PosteriorOracle(ch)
        moments = oracle.posterior_moments(y, k + 1)
    scaled = [np.asarray(moments[j]) / s2 ** (j + 1) for j in range(k + 1)]
    acc = 0.0
    for m in range(1, k + 2):
        c = (-1) ** (m - 1) * math.factorial(m - 1)
        acc = acc + c * bell_partial(k + 1, m, scaled)
    return _out(s2 * acc)


# --------------------------------------------------------------------------
# Cumulants
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CumulantVector:
    """Posterior cumulants ``kappa(1..K)`` at ``y``."""

    y: float
    values: tuple
    sigma2: float

    def __getitem__(self, k: int) -> float:
        return self.values[k - 1]


def conditional_cumulants(ch: ScalarChannel, y, K: int) -> np.ndarray:
    """``kappa_{X|Y=y}(k)`` for ``k = 1..K`` (axis 0) from ``log f_Y``.

    ``kappa(1) = y + s2 L_1``, ``kappa(2) = s2 + s2^2 L_2`` and
    ``kappa(k) = s2^k L_k`` for ``k >= 3``.
    """
    y = np.asarray(y, dtype=float)
    s2 = ch.sigma2
    L = log_density_derivatives(ch, y, K)
    out = np.array([s2 ** (k + 1) * L[k] for k in range(K)])
    out[0] = out[0] + y
    if K >= 2:
        out[1] = _variance(s2, L[1])
    return out


def conditional_cumulant(ch: ScalarChannel, k: int, y, method: str = "density", oracle=None):
    """``kappa_{X|Y=y}(k)``.

    ``method="density"`` uses derivatives of ``log f_Y``;
    ``method="moments"`` uses ``sigma^{2(k-1)} d^{k-1} E[X|Y]`` with the
    derivative built from posterior moments.
    """
    if not 1 <= k <= MAX_ORDER:
        raise CapabilityError(f"cumulant order must lie in 1..{MAX_ORDER}")
    if method == "density":
        return _out(conditional_cumulants(ch, y, k)[k - 1])
    if method == "moments":
        return _out(ch.sigma2 ** (k - 1) * np.asarray(ce_derivative(ch, k - 1, y, oracle=oracle)))
    raise DomainError(f"unknown method {method!r}")


def cumulant_vector(ch: ScalarChannel, y: float, K: int) -> CumulantVector:
    vals = conditional_cumulants(ch, float(y), K)
    return CumulantVector(float(y), tuple(float(v) for v in vals), ch.sigma2)


@dataclass(frozen=True)
class CumulantBound:
    """``|kappa_{X|Y=y}(k)| <= a |y|^k + b``."""

    k: int
    a: float
    b: float

    def value(self, y):
        return self.a * np.abs(np.asarray(y, dtype=float)) ** self.k + self.b

    def holds(self, y, kappa) -> bool:
        return bool(np.all(np.abs(kappa) <= self.value(y)))


def cumulant_bound(prior, k: int) -> CumulantBound:
    """Polynomial growth bound on the ``k``-th posterior cumulant."""
    if k < 1:
        raise DomainError("k must be >= 1")
    e = max(k / 2 - 1, 1)
    a = k**k * 2 ** (k - 1) * (2**e + 2)
    b = k**k * (2 ** (e + k) * prior.moment(2) ** (k / 2) + prior.abs_moment(k))
    return CumulantBound(k, float(a), float(b))


# --------------------------------------------------------------------------
# Reconstruction of f_Y from the conditional mean
# --------------------------------------------------------------------------


def inverse_tre_density(mean_fn: Callable, sigma2: float, grid) -> np.ndarray:
    """Rebuild ``f_Y`` on ``grid`` from ``y -> E[X | Y = y]``.

    ``f_Y(y) = c exp(int_0^y (m(t) - t) / sigma2 dt)``, integrated with
    cumulative Simpson and normalised by the trapezoid mass on the grid.
    The grid should cover essentially all of the output mass.
    """
    if not sigma2 > 0:
        raise DomainError("sigma2 must be positive")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3 or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be strictly increasing with at least 3 points")
    g = (np.asarray(mean_fn(grid), dtype=float) - grid) / sigma2
    # log f must fall off at both ends, otherwise no density has this mean
    if g[0] <= 0 or g[-1] >= 0:
        raise DomainError("reconstructed density is not normalisable on this grid")
    logf = integrate.cumulative_simpson(g, x=grid, initial=0.0)
    logf -= logf.max()
    f = np.exp(logf)
    return f / integrate.trapezoid(f, grid)


# --------------------------------------------------------------------------
# Slope bounds
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SlopeCheck:
    lower: float
    value: np.ndarray
    upper: float

    @property
    def ok(self) -> bool:
        slack = 1e-12 * (1.0 + self.upper)
        return bool(np.all((self.value >= self.lower) & (self.value <= self.upper + slack)))


def slope_trace_bounds(ch: ScalarChannel, y, R: Optional[float] = None) -> SlopeCheck:
    """``0 <= d/dy E[X | Y = y] <= R^2 / sigma2`` for priors on ``[-R, R]``."""
    if not isinstance(ch.prior, DiscretePrior):
        raise DomainError("slope bounds need a prior with bounded support")
    radius = ch.prior.support_radius
    R = radius if R is None else float(R)
    if R < radius:
        raise DomainError(f"support radius {radius} exceeds R={R}")
    slope = np.asarray(hatsell_nolte_variance(ch, y)) / ch.sigma2
    return SlopeCheck(0.0, slope, R * R / ch.sigma2)


__all__ = [
    "CumulantBound",
    "CumulantVector",
    "GaussianPrior",
    "ce_derivative",
    "ce_derivatives",
    "conditional_cumulant",
    "conditional_cumulants",
    "cumulant_bound",
    "cumulant_vector",
    "hatsell_nolte_variance",
    "hermite_moment",
    "inverse_tre_density",
    "jaffer_step",
    "log_density_derivatives",
    "moment_jets",
    "moment_via_bell",
    "moment_via_generalized_tre",
    "slope_trace_bounds",
    "tre_mean",
]
