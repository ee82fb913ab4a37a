"""Special functions and combinatorial polynomials.

Partial/complete Bell polynomials (symbolic tables), the real Hermite
family ``G_m(t) = (-i)^m He_m(i t)``, probabilists' Hermite and Legendre
recurrences, the moment <-> cumulant maps and the modified Bessel ratio
``I_nu(t) / I_{nu-1}(t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Sequence, Tuple

import numpy as np

MAX_ORDER = 12

Monomial = Tuple[int, ...]


@dataclass(frozen=True)
class PartialBellTable:
    """Coefficients of ``B_{n,k}`` as maps from exponent tuples to integers.

    An exponent tuple ``e`` of length ``max_n`` stands for the monomial
    ``x_1^e[0] * x_2^e[1] * ...``.  Entries are generated once with the
    recurrence ``B_{n,k} = sum_i C(n-1, i-1) x_i B_{n-i,k-1}``.
    """

    max_n: int = MAX_ORDER
    entries: Dict[Tuple[int, int], Dict[Monomial, int]] = field(
        default_factory=dict, repr=False
    )

    def __post_init__(self):
        if self.entries:
            return
        zero = (0,) * self.max_n
        table: Dict[Tuple[int, int], Dict[Monomial, int]] = {(0, 0): {zero: 1}}
        for n in range(1, self.max_n + 1):
            table[(n, 0)] = {}
            for k in range(1, n + 1):
                poly: Dict[Monomial, int] = {}
                for i in range(1, n - k + 2):
                    prev = table.get((n - i, k - 1), {})
                    c = math.comb(n - 1, i - 1)
                    for mono, coef in prev.items():
                        new = list(mono)
                        new[i - 1] += 1
                        key = tuple(new)
                        poly[key] = poly.get(key, 0) + c * coef
                table[(n, k)] = poly
        object.__setattr__(self, "entries", table)

    def monomials(self, n: int, k: int) -> Dict[Monomial, int]:
        if not (0 <= k <= n <= self.max_n):
            raise ValueError(f"Bell index out of range: n={n}, k={k}, max_n={self.max_n}")
        return self.entries[(n, k)]

    def evaluate(self, n: int, k: int, args):
        """Evaluate ``B_{n,k}`` at ``args`` (scalars or broadcastable arrays)."""
        poly = self.monomials(n, k)
        need = n - k + 1
        if len(args) < need:
            raise ValueError(f"B_{{{n},{k}}} needs {need} arguments, got {len(args)}")
        xs = [np.asarray(a, dtype=float) for a in args[:need]]
        total = 0.0
        for mono, coef in poly.items():
            term = float(coef)
            for j, e in enumerate(mono[:need]):
                if e:
                    term = term * xs[j] ** e
            total = total + term
        return total


@lru_cache(maxsize=None)
def bell_table(max_n: int = MAX_ORDER) -> PartialBellTable:
    return PartialBellTable(max_n)


def bell_partial(n: int, k: int, args: Sequence[float]):
    """Partial Bell polynomial ``B_{n,k}(x_1, ..., x_{n-k+1})``."""
    if not (1 <= k <= n):
        if n == 0 and k == 0:
            return 1.0
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")
    if n > MAX_ORDER:
        raise ValueError(f"n={n} exceeds the tabulated maximum {MAX_ORDER}")
    return bell_table().evaluate(n, k, args)


def bell_complete(n: int, args: Sequence[float]):
    """Complete Bell polynomial ``B_n = sum_k B_{n,k}``; ``B_0 = 1``."""
    if n == 0:
        return 1.0
    return sum(bell_partial(n, k, args) for k in range(1, n + 1))


def hermite_g(m: int, t):
    """Real polynomial ``G_m(t) = (-i)^m He_m(i t)``.

    Evaluated through ``G_{m+1} = t G_m + m G_{m-1}`` so no complex
    arithmetic is involved.
    """
    if m < 0:
        raise ValueError("m must be non-negative")
    t = np.asarray(t, dtype=float)
    g_prev, g = np.ones_like(t), t.copy()
    if m == 0:
        return g_prev if g_prev.ndim else float(g_prev)
    for j in range(1, m):
        g_prev, g = g, t * g + j * g_prev
    return g if g.ndim else float(g)


def hermite_he(m: int, t):
    """Probabilists' Hermite polynomial ``He_m(t)``."""
    if m < 0:
        raise ValueError("m must be non-negative")
    t = np.asarray(t, dtype=float)
    h_prev, h = np.ones_like(t), t.copy()
    if m == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    for j in range(1, m):
        h_prev, h = h, t * h - j * h_prev
    return h if h.ndim else float(h)


def hermite_he_all(m_max: int, t) -> np.ndarray:
    """Stack ``He_0..He_{m_max}`` along a new leading axis."""
    t = np.asarray(t, dtype=float)
    out = np.empty((m_max + 1,) + t.shape)
    out[0] = 1.0
    if m_max >= 1:
        out[1] = t
    for j in range(1, m_max):
        out[j + 1] = t * out[j] - j * out[j - 1]
    return out


def legendre(n: int, t):
    """Legendre polynomial ``P_n(t)`` by the three-term recurrence."""
    if n < 0:
        raise ValueError("n must be non-negative")
    t = np.asarray(t, dtype=float)
    p_prev, p = np.ones_like(t), t.copy()
    if n == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    for j in range(1, n):
        p_prev, p = p, ((2 * j + 1) * t * p - j * p_prev) / (j + 1)
    return p if p.ndim else float(p)


def moments_to_cumulants(moments: Sequence[float]) -> list:
    """Raw moments ``mu_1..mu_K`` -> cumulants ``kappa_1..kappa_K``.

    ``kappa_k = sum_m (-1)^(m-1) (m-1)! B_{k,m}(mu_1, ..., mu_{k-m+1})``.
    Entries may be numpy arrays (evaluated elementwise).
    """
    K = len(moments)
    if K < 1:
        raise ValueError("need at least one moment")
    out = []
    for k in range(1, K + 1):
        acc = 0.0
        for m in range(1, k + 1):
            c = (-1) ** (m - 1) * math.factorial(m - 1)
            acc = acc + c * bell_partial(k, m, moments)
        out.append(acc)
    return out


def cumulants_to_moments(cumulants: Sequence[float]) -> list:
    """Cumulants ``kappa_1..kappa_K`` -> raw moments via complete Bell."""
    return [bell_complete(k, cumulants) for k in range(1, len(cumulants) + 1)]


def _bessel_ratio_series(nu: float, t: float) -> float:
    # I_nu(t) = (t/2)^nu / Gamma(nu+1) * S_nu(t),  S_mu = sum_j (t^2/4)^j / (j! (mu+1)_j)
    q = 0.25 * t * t

    def s(mu):
        term, total, j = 1.0, 1.0, 0
        while True:
            j += 1
            term *= q / (j * (mu + j))
            total += term
            if abs(term) < 1e-17 * abs(total) or j > 200:
                return total

    return t / (2.0 * nu) * s(nu) / s(nu - 1.0)


def _bessel_ratio_cf(nu: float, t: float, tol: float = 1e-14, max_iter: int = 1_000_000) -> float:
    # I_nu / I_{nu-1} = 1 / (2 nu / t + 1 / (2 (nu+1) / t + ...)), modified Lentz.
    tiny = 1e-300
    b0 = 2.0 * nu / t
    f = b0 if b0 != 0.0 else tiny
    C, D = f, 0.0
    for j in range(1, max_iter):
        b = 2.0 * (nu + j) / t
        D = b + D
        D = tiny if D == 0.0 else D
        C = b + 1.0 / C
        C = tiny if C == 0.0 else C
        D = 1.0 / D
        delta = C * D
        f *= delta
        if abs(delta - 1.0) < tol:
            return 1.0 / f
    raise ArithmeticError(f"Bessel ratio continued fraction did not converge (nu={nu}, t={t})")


def bessel_ratio(nu: float, t):
    """``I_nu(t) / I_{nu-1}(t)`` for ``nu >= 1/2`` and ``t > 0``.

    Continued fraction (Perron/Gautschi form) with a 1e-14 stopping rule;
    power series below ``t = 1e-3``.  Never forms the individual Bessel
    values, so large ``t`` does not overflow.
    """
    if nu < 0.5:
        raise ValueError("bessel_ratio requires nu >= 1/2")
    arr = np.asarray(t, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("bessel_ratio requires t > 0")

    def one(x):
        r = _bessel_ratio_series(nu, x) if x < 1e-3 else _bessel_ratio_cf(nu, x)
        return min(r, 1.0)  # CF rounding can overshoot by an ulp

    if arr.ndim == 0:
        return one(float(arr))
    return np.array([one(float(x)) for x in arr.ravel()]).reshape(arr.shape)


def bessel_ratio_derivative(nu: float, t):
    """``d/dt [I_nu/I_{nu-1}] = 1 - (2 nu - 1) rho / t - rho^2``."""
    rho = bessel_ratio(nu, t)
    return 1.0 - (2.0 * nu - 1.0) * rho / np.asarray(t, dtype=float) - rho * rho
