"""Laws of the estimate ``g(Y)`` and of the error ``W = X - g(Y)``.

For an increasing, invertible estimator ``g`` the change of variables gives
``F_{g(Y)}(x) = F_Y(g^{-1}(x))`` and, for the conditional mean,
``f(x) = sigma2 f_Y(g^{-1}(x)) / Var(X | Y = g^{-1}(x))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import integrate

from .analytic import ce_inverse_eval, ce_range
from .channel import LOG_SQRT_2PI, DiscretePrior, GaussianPrior, ScalarChannel
from .errors import CapabilityError, DomainError, RangeError
from .identities import tre_mean


def _out(arr):
    arr = np.asarray(arr, dtype=float)
    return arr if arr.ndim else float(arr)


def normal_pdf(z, sigma2: float):
    """Density of ``N(0, sigma2)``."""
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * z * z / sigma2 - LOG_SQRT_2PI - 0.5 * math.log(sigma2))


# --------------------------------------------------------------------------
# Estimator law
# --------------------------------------------------------------------------


def estimator_range(ch: ScalarChannel) -> Tuple[float, float]:
    """``(E[X|Y=mu-Ymax], E[X|Y=mu+Ymax])`` with ``Ymax = 10 sigma_Y``."""
    mu, ymax = ch.output_mean, 10.0 * ch.output_sd
    return float(tre_mean(ch, mu - ymax)), float(tre_mean(ch, mu + ymax))


def _check_inside(ch: ScalarChannel, x: np.ndarray):
    lo, hi = ce_range(ch)
    if np.any(x <= lo) or np.any(x >= hi):
        raise RangeError(f"estimate outside the open range ({lo}, {hi})")


def estimator_pdf(ch: ScalarChannel, x):
    """Density of ``E[X | Y]`` at ``x``."""
    x = np.asarray(x, dtype=float)
    _check_inside(ch, x)
    y = np.asarray(ce_inverse_eval(ch, x))
    var = np.asarray(ch.posterior_variance(y))
    logf = np.asarray(ch.log_density(y))
    with np.errstate(divide="ignore"):
        out = np.where(var > 0, np.exp(math.log(ch.sigma2) + logf - np.log(np.maximum(var, 1e-300))), 0.0)
    return _out(out)


def estimator_cdf(ch: ScalarChannel, x):
    """``P[E[X|Y] <= x] = F_Y(g^{-1}(x))``."""
    x = np.asarray(x, dtype=float)
    _check_inside(ch, x)
    return _out(ch.cdf(ce_inverse_eval(ch, x)))


@dataclass(frozen=True)
class EstimatorLaw:
    channel: ScalarChannel
    x: np.ndarray = field(repr=False)
    pdf: np.ndarray = field(repr=False)
    cdf: np.ndarray = field(repr=False)

    @classmethod
    def on_grid(cls, ch: ScalarChannel, points: int = 401) -> "EstimatorLaw":
        """Tabulate at the midpoints of ``points`` equal cells of the numerical range."""
        if points < 1:
            raise DomainError("need at least one grid point")
        lo, hi = estimator_range(ch)
        xs = lo + (hi - lo) * (np.arange(points) + 0.5) / points
        return cls(ch, xs, np.asarray(estimator_pdf(ch, xs)), np.asarray(estimator_cdf(ch, xs)))

    def total_mass(self) -> float:
        """``int pdf dx`` over the range by adaptive quadrature in x."""
        return estimator_mass(self.channel)


def estimator_mass(ch: ScalarChannel) -> float:
    lo, hi = estimator_range(ch)
    ys = np.linspace(ch.output_mean - 10 * ch.output_sd, ch.output_mean + 10 * ch.output_sd, 81)
    brk = np.unique(np.asarray(tre_mean(ch, ys)))
    brk = brk[(brk > lo) & (brk < hi)]
    open_lo, open_hi = ce_range(ch)

    def pdf(x):
        # the numerical range can round onto the boundary of the open range
        return estimator_pdf(ch, x) if open_lo < x < open_hi else 0.0

    # tail breakpoints pile up within ulps of the range ends; merge them
    edges = [lo]
    for b in list(brk) + [hi]:
        if b - edges[-1] > 1e-9 * (hi - lo):
            edges.append(b)
    edges[-1] = hi
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(pdf, a, b, epsabs=1e-12, epsrel=1e-10, limit=200)
        total += val
    return total


# --------------------------------------------------------------------------
# Estimators for the error law
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionalMeanEstimator:
    """``g(y) = E_Q[X | Y = y]`` computed under the prior of ``channel``.

    Using the true channel gives the matched estimator; a different prior
    gives a mismatched one.
    """

    channel: ScalarChannel

    def range(self) -> Tuple[float, float]:
        return ce_range(self.channel)

    def __call__(self, y):
        return tre_mean(self.channel, y)

    def inverse(self, x):
        return ce_inverse_eval(self.channel, x)

    def inverse_slope(self, x):
        """``d g^{-1}(x) / dx = sigma2 / Var_Q(X | Y = g^{-1}(x))``."""
        y = self.inverse(x)
        var = np.asarray(self.channel.posterior_variance(y))
        with np.errstate(divide="ignore"):
            return _out(self.channel.sigma2 / var)


def matched_estimator(ch: ScalarChannel) -> ConditionalMeanEstimator:
    return ConditionalMeanEstimator(ch)


def mismatched_estimator(prior_q, sigma2: float) -> ConditionalMeanEstimator:
    return ConditionalMeanEstimator(ScalarChannel(prior_q, sigma2))


@dataclass(frozen=True)
class LinearEstimator:
    """``g(y) = slope * y + intercept``."""

    slope: float
    intercept: float = 0.0

    def __post_init__(self):
        if self.slope == 0:
            raise DomainError("a constant estimator is not invertible")

    def range(self) -> Tuple[float, float]:
        return (-math.inf, math.inf)

    def __call__(self, y):
        return self.slope * np.asarray(y, dtype=float) + self.intercept

    def inverse(self, x):
        return _out((np.asarray(x, dtype=float) - self.intercept) / self.slope)

    def inverse_slope(self, x):
        return _out(np.full(np.shape(x), 1.0 / abs(self.slope)))


def _error_term(ch: ScalarChannel, g, x_atom: float, w: np.ndarray) -> np.ndarray:
    lo, hi = g.range()
    t = x_atom - w
    inside = (t > lo) & (t < hi)
    out = np.zeros(w.shape)
    if np.any(inside):
        ti = t[inside]
        yi = np.asarray(g.inverse(ti))
        phi = normal_pdf(yi - x_atom, ch.sigma2)
        slope = np.abs(np.asarray(g.inverse_slope(ti)))
        # far in the tails the slope overflows where phi has already vanished
        out[inside] = np.where(phi > 0, phi * slope, 0.0)
    return out


def error_pdf(ch: ScalarChannel, g, w):
    """Density of ``W = X - g(Y)`` at ``w``.

    ``f_W(w) = E[phi(g^{-1}(X - w) - X) |d g^{-1}(X - w)/dw| 1{X - w in range(g)}]``.
    """
    w = np.atleast_1d(np.asarray(w, dtype=float))
    scalar = np.ndim(w) == 1 and w.size == 1
    pr = ch.prior
    if isinstance(pr, DiscretePrior):
        total = np.zeros(w.shape)
        for xa, pa in zip(pr.points, pr.probs):
            if pa > 0:
                total += pa * _error_term(ch, g, xa, w)
    elif isinstance(pr, GaussianPrior):
        total = np.empty(w.shape)
        for i, wv in enumerate(w):
            f = lambda x: math.exp(pr.logpdf(x)) * float(_error_term(ch, g, x, np.array([wv]))[0])
            span = 12 * pr.sd
            val, _ = integrate.quad(f, pr.mean - span, pr.mean + span, epsabs=1e-12, limit=200)
            total[i] = val
    else:
        raise CapabilityError("error law needs a scalar discrete or Gaussian prior")
    return float(total[0]) if scalar else total


@dataclass(frozen=True)
class ErrorLaw:
    channel: ScalarChannel
    estimator: object
    w: np.ndarray = field(repr=False)
    pdf: np.ndarray = field(repr=False)

    @classmethod
    def on_grid(cls, ch: ScalarChannel, g, w) -> "ErrorLaw":
        w = np.asarray(w, dtype=float)
        return cls(ch, g, w, np.asarray(error_pdf(ch, g, w)))


def _graded_rule(a: float, b: float, nodes: int = 32, levels: int = 36):
    """Composite Gauss-Legendre on ``[a, b]`` with panels shrinking
    geometrically toward both ends (where the error density has
    log-type boundary behaviour)."""
    t, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * (b - a)
    cuts = np.concatenate([[0.0], np.geomspace(1e-14, 1.0, levels)])
    s = np.unique(np.concatenate([cuts * half, (2.0 - cuts[::-1]) * half]))
    left, right = a + s[:-1], a + s[1:]
    mid, rad = 0.5 * (left + right), 0.5 * (right - left)
    return (mid[:, None] + rad[:, None] * t).ravel(), (rad[:, None] * w).ravel()


def error_moment(ch: ScalarChannel, g, r: int, breaks=(), span: Optional[float] = None) -> float:
    """``int w^r f_W(w) dw`` by graded composite Gauss-Legendre.

    For discrete priors the density is smooth between the points
    ``x_i - sup g`` and ``x_i - inf g``; those are used as panel breaks.
    """
    pr = ch.prior
    lo, hi = -math.inf, math.inf
    extra = list(breaks)
    g_lo, g_hi = g.range()
    if isinstance(pr, DiscretePrior):
        x_lo, x_hi = pr.support_bounds
        lo, hi = x_lo - g_hi, x_hi - g_lo
        extra += [xa - e for xa in pr.points for e in (g_lo, g_hi) if math.isfinite(e)]
    if span is None:
        span = (pr.support_radius if isinstance(pr, DiscretePrior) else 10 * pr.sd) * 2 + 12 * ch.sigma
    lo, hi = max(lo, -span), min(hi, span)
    pts = sorted({lo, hi, *[b for b in extra if lo < b < hi]})
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        x, wt = _graded_rule(a, b)
        total += float(np.sum(wt * x**r * np.asarray(error_pdf(ch, g, x))))
    return total


# --------------------------------------------------------------------------
# Closed forms for the two-point prior
# --------------------------------------------------------------------------


def binary_error_pdf(w, p: float, sigma2: float, q: Optional[float] = None):
    """Error density for ``X in {-1, +1}``, ``P[X=1] = p``, conditional-mean
    estimator under ``P[X=1] = q`` (``q = p`` when matched)."""
    q = p if q is None else q
    w = np.asarray(w, dtype=float)
    lr = (1.0 - q) / q
    out = np.zeros(w.shape)
    pos = (w > 0) & (w < 2)
    neg = (w > -2) & (w < 0)
    wp, wn = w[pos], w[neg]
    out[pos] = (
        normal_pdf(0.5 * sigma2 * np.log((2 - wp) / wp * lr) - 1.0, sigma2) * sigma2 * p / (1 - (1 - wp) ** 2)
    )
    out[neg] = (
        normal_pdf(0.5 * sigma2 * np.log(-wn / (2 + wn) * lr) + 1.0, sigma2)
        * sigma2 * (1 - p) / (1 - (1 + wn) ** 2)
    )
    return _out(out)


def binary_linear_error_pdf(w, p: float, sigma2: float):
    """Error density for the two-point prior under ``g(y) = y / (1 + sigma2)``."""
    w = np.asarray(w, dtype=float)
    s = 1.0 + sigma2
    return _out(s * (p * normal_pdf(s * (1 - w) - 1, sigma2) + (1 - p) * normal_pdf(s * (-1 - w) + 1, sigma2)))
