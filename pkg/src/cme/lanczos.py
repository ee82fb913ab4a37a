"""Lanczos generalized derivatives ``D_h^{(n)}`` and their error budget.

``D_h^{(n)} f(x) = c_n / h^n * int_{-1}^{1} f(x + h t) P_n(t) dt`` with
``c_n = (2n+1)!! / 2``.  The operator is exact on polynomials of degree
``n + 1`` and has an ``O(h^2)`` bias otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import DomainError
from .polybasis import legendre


def double_factorial(m: int) -> int:
    return math.prod(range(m, 0, -2)) if m > 0 else 1


def lanczos_constant(n: int) -> float:
    """``c_n = (1/2) sqrt(2^{2n+2}/pi) Gamma(n + 3/2) = (2n+1)!! / 2``."""
    if n < 1:
        raise DomainError("order must be >= 1")
    return double_factorial(2 * n + 1) / 2.0


@lru_cache(maxsize=None)
def _gauss_legendre(nodes: int):
    return np.polynomial.legendre.leggauss(nodes)


@dataclass(frozen=True)
class LanczosOperator:
    """Order-``n`` Lanczos derivative with step ``h``.

    The inner integral uses a fixed ``nodes``-point Gauss-Legendre rule.
    """

    order: int
    h: float
    nodes: int = 64
    _weights: np.ndarray = field(init=False, repr=False, compare=False)
    _t: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.order < 1:
            raise DomainError("order must be >= 1")
        if not self.h > 0:
            raise DomainError("step h must be positive")
        t, w = _gauss_legendre(self.nodes)
        scale = lanczos_constant(self.order) / self.h**self.order
        object.__setattr__(self, "_t", t)
        object.__setattr__(self, "_weights", scale * w * legendre(self.order, t))

    def __call__(self, f: Callable, x):
        """Apply to a vectorised ``f`` at point(s) ``x``."""
        x = np.asarray(x, dtype=float)
        pts = x[..., None] + self.h * self._t
        vals = np.asarray(f(pts), dtype=float)
        out = vals @ self._weights
        return out if out.ndim else float(out)


def lanczos_derivative(f: Callable, op: LanczosOperator, x):
    return op(f, x)


def alpha(k: int) -> float:
    """Bias constant: ``|D_h^{(k)} f - f^{(k)}| <= alpha_k M_{k+2} h^2``."""
    return lanczos_constant(k) / math.factorial(k + 2) * 2.0 / math.sqrt(2 * k + 1)


def beta(k: int) -> float:
    """Noise constant: a perturbation of sup-size ``eps`` costs ``beta_k eps / h^k``."""
    return math.factorial(k + 2) * alpha(k)


@dataclass(frozen=True)
class LanczosErrorBudget:
    k: int
    M: float
    epsilon: float = 0.0

    def bound(self, h: float) -> float:
        return alpha(self.k) * self.M * h * h + beta(self.k) * self.epsilon / h**self.k


def choose_step(k: int, epsilon: float, default: float = 0.1) -> float:
    """``h = epsilon^{1/(k+2)}``; ``default`` when ``epsilon == 0``."""
    if epsilon < 0:
        raise DomainError("epsilon must be >= 0")
    if epsilon == 0:
        return float(default)
    return float(epsilon ** (1.0 / (k + 2)))
