"""Vector channels ``Y = X + N``, ``N ~ N(0, K)``, in small dimension.

Brute-force posterior sums over atom priors serve as the reference for
the Jacobian identity ``J_y E[U | Y] = K^{-1} Cov(X, U | Y)`` (with
``J[i, j] = d E[U_j] / d y_i``) and its consequences.  The uniform
sphere prior has Bessel-ratio closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .channel import SpherePrior
from .errors import CapabilityError, DomainError
from .polybasis import bessel_ratio, bessel_ratio_derivative

MAX_DIM = 4


@dataclass(frozen=True)
class VectorDiscretePrior:
    """Atoms ``points[i]`` in ``R^n`` with masses ``probs[i]``."""

    points: np.ndarray = field(repr=False)
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        prs = np.asarray(self.probs, dtype=float).ravel()
        if pts.shape[0] != prs.size or prs.size == 0:
            raise DomainError("one probability per atom required")
        if np.any(prs < 0) or abs(prs.sum() - 1.0) > 1e-12:
            raise DomainError("probabilities must be non-negative and sum to 1")
        pts.setflags(write=False)
        prs.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probs", prs)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @classmethod
    def uniform(cls, points) -> "VectorDiscretePrior":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))


@dataclass(frozen=True)
class VectorChannel:
    prior: Union[VectorDiscretePrior, SpherePrior]
    cov: np.ndarray = field(repr=False)
    _prec: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        n = self.prior.dim
        if cov.shape != (n, n):
            raise DomainError(f"covariance must be {n}x{n}")
        if n > MAX_DIM:
            raise CapabilityError(f"dimension {n} exceeds {MAX_DIM}")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-14):
            raise DomainError("covariance must be symmetric")
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise DomainError("covariance must be positive definite")
        if isinstance(self.prior, SpherePrior) and not np.allclose(cov, cov[0, 0] * np.eye(n)):
            raise CapabilityError("sphere prior is implemented for isotropic noise only")
        cov.setflags(write=False)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_prec", np.linalg.inv(cov))

    @property
    def dim(self) -> int:
        return self.prior.dim

    @property
    def precision(self) -> np.ndarray:
        return self._prec

    @property
    def sigma2(self) -> float:
        """Isotropic noise variance (sphere prior)."""
        return float(self.cov[0, 0])

    # -- atom priors -------------------------------------------------------

    def _atoms(self) -> VectorDiscretePrior:
        if not isinstance(self.prior, VectorDiscretePrior):
            raise CapabilityError("operation needs an atom prior")
        return self.prior

    def _log_terms(self, y: np.ndarray) -> np.ndarray:
        pr = self._atoms()
        d = y - pr.points
        with np.errstate(divide="ignore"):
            return np.log(pr.probs) - 0.5 * np.einsum("ij,jk,ik->i", d, self._prec, d)

    def posterior_weights(self, y) -> np.ndarray:
        lt = self._log_terms(np.asarray(y, dtype=float))
        w = np.exp(lt - lt.max())
        return w / w.sum()

    def log_density(self, y) -> float:
        y = np.asarray(y, dtype=float)
        lt = self._log_terms(y)
        m = lt.max()
        _, logdet = np.linalg.slogdet(2 * math.pi * self.cov)
        return float(m + math.log(np.exp(lt - m).sum()) - 0.5 * logdet)

    def score(self, y) -> np.ndarray:
        """``grad log f_Y(y) = K^{-1} (sum_i w_i x_i - y)``."""
        y = np.asarray(y, dtype=float)
        w = self.posterior_weights(y)
        return self._prec @ (w @ self._atoms().points - y)

    def posterior_expectation(self, fn: Callable[[np.ndarray], np.ndarray], y) -> np.ndarray:
        """``E[fn(X) | Y = y]``; ``fn`` maps the ``(m, n)`` atom array to ``(m, ...)``."""
        w = self.posterior_weights(y)
        vals = np.asarray(fn(self._atoms().points), dtype=float)
        return np.tensordot(w, vals, axes=(0, 0))


# --------------------------------------------------------------------------
# Conditional mean
# --------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _theta_rule(nodes: int = 256):
    t, w = np.polynomial.legendre.leggauss(nodes)
    return 0.5 * math.pi * (t + 1.0), 0.5 * math.pi * w


def _sphere_mean_quadrature(ch: VectorChannel, y: np.ndarray) -> np.ndarray:
    """Angular quadrature: ``E[cos(theta)]`` under ``exp(kappa cos) sin^{n-2}``."""
    pr = ch.prior
    n, R = pr.dim, pr.radius
    r = float(np.linalg.norm(y))
    if r == 0.0:
        return np.zeros(n)
    if n == 1:
        return np.array([R * math.tanh(R * y[0] / ch.sigma2)])
    kappa = R * r / ch.sigma2
    theta, w = _theta_rule()
    c = np.cos(theta)
    logw = kappa * (c - 1.0) + (n - 2) * np.log(np.sin(theta))
    wt = w * np.exp(logw - logw.max())
    return R * y / r * float(np.dot(wt, c) / wt.sum())


def vector_tre_mean(ch: VectorChannel, y) -> np.ndarray:
    """``E[X | Y = y] = y + K grad log f_Y(y)``."""
    y = np.asarray(y, dtype=float)
    if isinstance(ch.prior, SpherePrior):
        return _sphere_mean_quadrature(ch, y)
    return y + ch.cov @ ch.score(y)


def sphere_conditional_mean(R: float, n: int, y, sigma2: float = 1.0) -> np.ndarray:
    """``R y/|y| rho(R|y|/sigma2)`` with ``rho = I_{n/2} / I_{n/2 - 1}``."""
    y = np.asarray(y, dtype=float)
    r = float(np.linalg.norm(y))
    if r == 0.0:
        raise DomainError("closed form is singular at y = 0")
    return R * y / r * bessel_ratio(n / 2.0, R * r / sigma2)


def sphere_second_cumulant(R: float, n: int, y, s1: int, s2: int, sigma2: float = 1.0) -> float:
    """``Cov(X_{s1}, X_{s2} | Y = y)`` for the uniform sphere prior.

    ``sigma2 [R rho (delta/r - y1 y2 / r^3) + (R^2/sigma2) y1 y2 / r^2 rho'(t)]``
    with ``t = R r / sigma2`` and ``rho'(t) = 1 - (n-1) rho / t - rho^2``.
    """
    y = np.asarray(y, dtype=float)
    r = float(np.linalg.norm(y))
    if r == 0.0:
        raise DomainError("closed form is singular at y = 0")
    t = R * r / sigma2
    rho = bessel_ratio(n / 2.0, t)
    drho = bessel_ratio_derivative(n / 2.0, t)
    delta = 1.0 if s1 == s2 else 0.0
    ya, yb = y[s1], y[s2]
    return float(sigma2 * (R * rho * (delta / r - ya * yb / r**3) + R * R / sigma2 * ya * yb / r**2 * drho))


def sphere_cumulant_matrix(R: float, n: int, y, sigma2: float = 1.0) -> np.ndarray:
    return np.array([[sphere_second_cumulant(R, n, y, i, j, sigma2) for j in range(n)] for i in range(n)])


# --------------------------------------------------------------------------
# Finite differences
# --------------------------------------------------------------------------


def fd_jacobian(fn: Callable[[np.ndarray], np.ndarray], y, h: Optional[float] = None, richardson: bool = False):
    """``J[i, j] = d fn_j / d y_i`` by central differences (optionally Richardson)."""
    y = np.asarray(y, dtype=float)
    h = 1e-4 * (1.0 + float(np.linalg.norm(y))) if h is None else h

    def central(step):
        rows = []
        for i in range(y.size):
            e = np.zeros_like(y)
            e[i] = step
            rows.append((np.asarray(fn(y + e)) - np.asarray(fn(y - e))) / (2 * step))
        return np.array(rows)

    j1 = central(h)
    if not richardson:
        return j1
    j2 = central(h / 2)
    return (4 * j2 - j1) / 3


def fd_hessian(fn: Callable[[np.ndarray], float], y, h: float = 1e-3) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    n = y.size
    H = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h
            ej[j] = h
            H[i, j] = (fn(y + ei + ej) - fn(y + ei - ej) - fn(y - ei + ej) + fn(y - ei - ej)) / (4 * h * h)
    return H


def _checked_jacobian(fn, y, target, tol: float = 1e-4) -> float:
    dev = float(np.max(np.abs(fd_jacobian(fn, y) - target)))
    if dev > tol:
        dev = min(dev, float(np.max(np.abs(fd_jacobian(fn, y, richardson=True) - target))))
    return dev


# --------------------------------------------------------------------------
# Identity checks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerFamily:
    """``U = prod_i (e_i^T K^{-1} X)^{v_i}``."""

    v: Tuple[int, ...]

    def __call__(self, ch: VectorChannel, x: np.ndarray) -> np.ndarray:
        z = x @ ch.precision.T
        return np.prod(z ** np.asarray(self.v), axis=1)


UDescriptor = Union[str, PowerFamily, Sequence[int]]


def _u_values(ch: VectorChannel, U: UDescriptor) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(U, str):
        if U != "identity":
            raise DomainError(f"unknown U descriptor {U!r}")
        return lambda x: x
    fam = U if isinstance(U, PowerFamily) else PowerFamily(tuple(U))
    return lambda x: fam(ch, x)[:, None]


def jacobian_identity_check(ch: VectorChannel, y, U: UDescriptor = "identity") -> float:
    """``max |J_y E[U|Y=y] - K^{-1} Cov(X, U | Y=y)|``."""
    y = np.asarray(y, dtype=float)
    uf = _u_values(ch, U)
    mean_u = lambda t: ch.posterior_expectation(uf, t)
    ex = ch.posterior_expectation(lambda x: x, y)
    eu = mean_u(y)
    exu = ch.posterior_expectation(lambda x: x[:, :, None] * uf(x)[:, None, :], y)
    cov = exu - np.outer(ex, eu)
    return _checked_jacobian(mean_u, y, ch.precision @ cov)


def matrix_jaffer_check(ch: VectorChannel, k: int, y) -> float:
    """``E[(XX^T)^k|Y] = K J E[(XX^T)^{k-1} X|Y] + E[X|Y] E[X^T (XX^T)^{k-1}|Y]``."""
    if k < 1:
        raise DomainError("k must be >= 1")
    y = np.asarray(y, dtype=float)
    sq = lambda x: np.sum(x * x, axis=1)
    lhs = ch.posterior_expectation(lambda x: (sq(x) ** (k - 1))[:, None, None] * x[:, :, None] * x[:, None, :], y)
    vec = lambda t: ch.posterior_expectation(lambda x: (sq(x) ** (k - 1))[:, None] * x, t)
    J = fd_jacobian(vec, y)
    rhs = ch.cov @ J + np.outer(ch.posterior_expectation(lambda x: x, y), vec(y))
    dev = float(np.max(np.abs(lhs - rhs)))
    if dev > 1e-4:
        J = fd_jacobian(vec, y, richardson=True)
        dev = min(dev, float(np.max(np.abs(lhs - (ch.cov @ J + np.outer(ch.posterior_expectation(lambda x: x, y), vec(y)))))))
    return dev


def diagonal_jaffer_check(ch: VectorChannel, v: Sequence[int], m: int, y) -> float:
    """For diagonal ``K``:
    ``E[X_m X^v | Y] = K_mm d/dy_m E[X^v | Y] + E[X^v | Y] E[X_m | Y]``."""
    if not np.allclose(ch.cov, np.diag(np.diag(ch.cov))):
        raise DomainError("diagonal covariance required")
    y = np.asarray(y, dtype=float)
    v = np.asarray(v)
    mono = lambda x: np.prod(x**v, axis=1)
    ev = lambda t: ch.posterior_expectation(mono, t)
    lhs = ch.posterior_expectation(lambda x: x[:, m] * mono(x), y)
    grad = fd_jacobian(lambda t: np.atleast_1d(ev(t)), y, richardson=True)[:, 0]
    rhs = ch.cov[m, m] * grad[m] + ev(y) * ch.posterior_expectation(lambda x: x[:, m], y)
    return float(abs(lhs - rhs))


def posterior_cgf(ch: VectorChannel, y, t) -> float:
    """``log E[exp(t^T X) | Y = y]`` by brute-force summation."""
    lt = np.log(ch.posterior_weights(y) + 0.0) + ch._atoms().points @ np.asarray(t, dtype=float)
    m = lt.max()
    return float(m + math.log(np.exp(lt - m).sum()))


def cgf_cumulant_check(ch: VectorChannel, y, h: float = 1e-3) -> float:
    """Second partials of the posterior CGF at 0 against ``K J_y E[X|Y]``."""
    y = np.asarray(y, dtype=float)
    H = fd_hessian(lambda t: posterior_cgf(ch, y, t), np.zeros(ch.dim), h)
    J = fd_jacobian(lambda t: vector_tre_mean(ch, t), y, richardson=True)
    return float(np.max(np.abs(H - ch.cov @ J)))


def vector_info_density(ch: VectorChannel, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = y - x
    _, logdet = np.linalg.slogdet(2 * math.pi * ch.cov)
    return float(-0.5 * d @ ch.precision @ d - 0.5 * logdet - ch.log_density(y))


def info_hessian_check(ch: VectorChannel, x, y, h: float = 1e-3) -> float:
    """``Hess_y i(x; y) = -K^{-1} Var(X|Y=y) K^{-1}`` against finite differences."""
    y = np.asarray(y, dtype=float)
    ex = ch.posterior_expectation(lambda a: a, y)
    var = ch.posterior_expectation(lambda a: a[:, :, None] * a[:, None, :], y) - np.outer(ex, ex)
    target = -ch.precision @ var @ ch.precision
    H = fd_hessian(lambda t: vector_info_density(ch, x, t), y, h)
    return float(np.max(np.abs(H - target)))


def sphere_cumulant_check(ch: VectorChannel, y) -> float:
    """Closed-form sphere covariance against ``sigma2 J_y E[X|Y]`` by differences."""
    pr = ch.prior
    if not isinstance(pr, SpherePrior):
        raise DomainError("sphere prior required")
    target = sphere_cumulant_matrix(pr.radius, pr.dim, y, ch.sigma2)
    J = fd_jacobian(lambda t: vector_tre_mean(ch, t), y, richardson=True)
    return float(np.max(np.abs(ch.sigma2 * J - target)))
