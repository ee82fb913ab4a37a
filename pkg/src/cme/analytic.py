"""Taylor series of the conditional mean and of its compositional inverse."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .channel import DiscretePrior, ScalarChannel
from .errors import DomainError, NumericError, RangeError
from .identities import conditional_cumulants, tre_mean
from .polybasis import MAX_ORDER, bell_partial

MAX_SERIES_ORDER = MAX_ORDER - 1


@dataclass(frozen=True)
class PowerSeries:
    """``sum_k coeffs[k] (y - center)^k``."""

    center: float
    coeffs: Tuple[float, ...]
    radius_lower_bound: Optional[float] = None

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, y):
        z = np.asarray(y, dtype=float) - self.center
        return np.polynomial.polynomial.polyval(z, np.asarray(self.coeffs))

    def truncate(self, K: int) -> "PowerSeries":
        return PowerSeries(self.center, self.coeffs[: K + 1], self.radius_lower_bound)


def ce_series(ch: ScalarChannel, a: float, K: int = 10) -> PowerSeries:
    """Taylor series of ``y -> E[X | Y = y]`` about ``a`` up to ``(y-a)^K``.

    Coefficient ``k`` is ``kappa_{X|Y=a}(k+1) / (k! sigma2^k)``.  When the
    prior is bounded by ``A`` the radius is at least ``sigma2 / (2 A e)``.
    """
    if not 0 <= K <= MAX_SERIES_ORDER:
        raise DomainError(f"series order must lie in 0..{MAX_SERIES_ORDER}")
    s2 = ch.sigma2
    kap = conditional_cumulants(ch, float(a), K + 1)
    coeffs = tuple(float(kap[k]) / (math.factorial(k) * s2**k) for k in range(K + 1))
    radius = None
    if isinstance(ch.prior, DiscretePrior):
        A = ch.prior.support_radius
        radius = s2 / (2.0 * A * math.e) if A > 0 else math.inf
    return PowerSeries(float(a), coeffs, radius)


@dataclass(frozen=True)
class InverseSeries:
    """``y = anchor + sum_n b_n (x - value)^n / n!`` (factorial convention)."""

    anchor: float
    value: float
    b: Tuple[float, ...]

    @property
    def order(self) -> int:
        return len(self.b)

    def __call__(self, x, K: Optional[int] = None):
        K = self.order if K is None else min(K, self.order)
        z = np.asarray(x, dtype=float) - self.value
        c = [0.0] + [self.b[n - 1] / math.factorial(n) for n in range(1, K + 1)]
        out = self.anchor + np.polynomial.polynomial.polyval(z, np.asarray(c))
        return out if np.ndim(out) else float(out)

    def trust_radius(self, reference, tol: float = 1e-7, r_max: float = 1.0, steps: int = 200) -> float:
        """Largest ``r`` on a ladder such that ``|self(x) - reference(x)| <= tol``
        for all ``|x - value| <= r`` (sampled)."""
        best = 0.0
        for r in np.linspace(r_max / steps, r_max, steps):
            xs = self.value + np.linspace(-r, r, 21)
            try:
                ref = np.array([reference(x) for x in xs])
            except RangeError:
                break
            if np.max(np.abs(self(xs) - ref)) > tol:
                break
            best = float(r)
        return best


def lagrange_invert(s: PowerSeries) -> InverseSeries:
    """Compositional inverse of ``s`` by Lagrange inversion.

    With ``a_n = n! s_n``: ``b_1 = 1/a_1`` and
    ``b_n = b_1^n sum_{k=1}^{n-1} (-1)^k n^{(k)} B_{n-1,k}(c_1, ..., c_{n-k})``
    where ``c_j = a_{j+1} / ((j+1) a_1)`` and ``n^{(k)}`` is the rising factorial.
    """
    K = s.order
    if K < 1:
        raise DomainError("need at least a linear term")
    a = [math.factorial(n) * s.coeffs[n] for n in range(K + 1)]
    if a[1] == 0.0 or not math.isfinite(a[1]):
        raise NumericError("vanishing linear coefficient: the series has no inverse")
    b1 = 1.0 / a[1]
    c = [a[j + 1] / ((j + 1) * a[1]) for j in range(1, K)]
    b = [b1]
    for n in range(2, K + 1):
        acc = 0.0
        for k in range(1, n):
            rising = math.prod(range(n, n + k))
            acc += (-1) ** k * rising * bell_partial(n - 1, k, c)
        b.append(b1**n * acc)
    return InverseSeries(s.center, s.coeffs[0], tuple(float(v) for v in b))


def ce_range(ch: ScalarChannel) -> Tuple[float, float]:
    """Open range of ``y -> E[X | Y = y]``."""
    if isinstance(ch.prior, DiscretePrior):
        return ch.prior.support_bounds
    return (-math.inf, math.inf)


def _mean_and_slope(ch: ScalarChannel, y: np.ndarray):
    r = ch.density_ratios(y, 2)
    s2 = ch.sigma2
    return y + s2 * r[1], 1.0 + s2 * (r[2] - r[1] ** 2)


def ce_inverse_eval(ch: ScalarChannel, x, tol: float = 1e-12, series: Optional[InverseSeries] = None):
    """The unique ``y`` with ``E[X | Y = y] = x``.

    Vectorised safeguarded Newton: a bracket is grown by doubling, then
    Newton steps (slope ``Var(X|Y)/sigma2``) are taken when they stay
    inside the bracket and bisection steps otherwise.  An inverse series,
    when given, supplies the starting point.
    """
    xs = np.asarray(x, dtype=float)
    flat = xs.ravel()
    lo_r, hi_r = ce_range(ch)
    if np.any(~((flat > lo_r) & (flat < hi_r))):
        raise RangeError(f"x outside the estimator range ({lo_r}, {hi_r})")
    y = np.asarray(series(flat), dtype=float) if series is not None else flat.copy()
    y = np.where(np.isfinite(y), y, flat)

    step0 = max(1.0, ch.sigma2)
    lo, hi = y - step0, y + step0
    for side, sign in (("lo", -1.0), ("hi", 1.0)):
        step = np.full(flat.shape, step0)
        for _ in range(200):
            b = lo if side == "lo" else hi
            g, _ = _mean_and_slope(ch, b)
            bad = (g - flat > 0) if side == "lo" else (g - flat < 0)
            if not bad.any():
                break
            b[bad] += sign * step[bad]
            step[bad] *= 2
        else:
            raise NumericError("could not bracket the inverse")

    y = np.clip(y, lo, hi)
    for _ in range(300):
        g, slope = _mean_and_slope(ch, y)
        res = g - flat
        lo = np.where(res < 0, y, lo)
        hi = np.where(res > 0, y, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = y - res / slope
        ok = np.isfinite(newton) & (newton > lo) & (newton < hi)
        y_new = np.where(ok, newton, 0.5 * (lo + hi))
        y_new = np.where(res == 0, y, y_new)
        done = np.abs(y_new - y) <= 2 * np.finfo(float).eps * (1.0 + np.abs(y))
        y = y_new
        if done.all():
            break
    g, _ = _mean_and_slope(ch, y)
    worst = float(np.max(np.abs(g - flat))) if flat.size else 0.0
    if worst > tol:
        raise NumericError(f"inverse residual {worst:.3g} exceeds tol {tol:.3g}")
    out = y.reshape(xs.shape)
    return out if out.ndim else float(out)


def series_inverse_eval(
    ch: ScalarChannel, x: float, anchor: float = 0.0, tol: float = 1e-4, K_max: int = MAX_SERIES_ORDER
) -> Tuple[float, Optional[int]]:
    """Evaluate the inverse by truncated series, growing the order until the
    round trip ``|E[X|Y=y] - x| <= tol``; fall back to root-finding.

    Returns ``(y, K)`` with ``K = None`` when the root-finder was used.
    """
    inv = lagrange_invert(ce_series(ch, anchor, min(K_max, MAX_SERIES_ORDER)))
    for K in range(1, inv.order + 1):
        y = inv(x, K)
        if math.isfinite(y) and abs(tre_mean(ch, y) - x) <= tol:
            return float(y), K
    return ce_inverse_eval(ch, x), None


def two_point_mean(y, p: float, sigma2: float):
    """Closed-form ``E[X | Y = y]`` for ``X in {-1, +1}``, ``P[X = 1] = p``."""
    return np.tanh(np.asarray(y, dtype=float) / sigma2 + 0.5 * math.log(p / (1.0 - p)))


def two_point_inverse(x, p: float, sigma2: float):
    """Closed-form inverse of :func:`two_point_mean`."""
    x = np.asarray(x, dtype=float)
    return 0.5 * sigma2 * np.log((1.0 + x) / (1.0 - x) * (1.0 - p) / p)
