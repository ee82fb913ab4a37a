"""MMSE, its information-density representations and a Poincare lower bound."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .channel import DiscretePrior, GaussianPrior, PosteriorOracle, ScalarChannel
from .errors import CapabilityError, NumericError
from .identities import hatsell_nolte_variance, tre_mean
from .infodensity import info_density


@lru_cache(maxsize=None)
def _hermite_rule(nodes: int):
    t, w = np.polynomial.hermite_e.hermegauss(nodes)
    return t, w / math.sqrt(2.0 * math.pi)


@lru_cache(maxsize=None)
def _panel_rule(panels: int = 48, nodes: int = 32, half_width: float = 12.0):
    """Composite Gauss-Legendre for ``E[h(Z)]``, ``Z ~ N(0,1)``, on ``|z| <= half_width``."""
    t, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(-half_width, half_width, panels + 1)
    mid, rad = 0.5 * (edges[1:] + edges[:-1]), 0.5 * (edges[1:] - edges[:-1])
    z = (mid[:, None] + rad[:, None] * t).ravel()
    wz = (rad[:, None] * w).ravel() * np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    return z, wz


def _prior_rule(ch: ScalarChannel, nodes: int = 64):
    """Atoms and weights of the prior, or a Gauss-Hermite rule for a Gaussian prior."""
    pr = ch.prior
    if isinstance(pr, DiscretePrior):
        keep = pr.weights > 0
        return pr.atoms[keep], pr.weights[keep]
    if isinstance(pr, GaussianPrior):
        t, w = _hermite_rule(nodes)
        return pr.mean + pr.sd * t, w
    raise CapabilityError("scalar discrete or Gaussian prior required")


def _output_integral(ch: ScalarChannel, h) -> float:
    """``int h(y) f_Y(y) dy`` by adaptive quadrature with breaks at the atoms."""
    mu, sy = ch.output_mean, ch.output_sd
    lo, hi = mu - 14 * sy, mu + 14 * sy
    pts = [lo, hi]
    if isinstance(ch.prior, DiscretePrior):
        pts += [x for x in ch.prior.points if lo < x < hi]
    pts = sorted(set(pts))
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val, err = integrate.quad(
            lambda y: h(y) * math.exp(ch.log_density(y)), a, b, epsabs=1e-13, epsrel=1e-12, limit=400
        )
        if err > 1e-8:
            raise NumericError(f"output-space quadrature error {err:.3g}")
        total += val
    return total


def mmse_exact(ch: ScalarChannel, oracle: PosteriorOracle = None) -> float:
    """``int Var(X | Y = y) f_Y(y) dy`` with the posterior oracle's variance."""
    oracle = oracle or PosteriorOracle(ch)
    if isinstance(ch.prior, DiscretePrior) and len(ch.prior.points) == 1:
        return 0.0
    return _output_integral(ch, lambda y: max(float(oracle.posterior_variance(y)), 0.0))


def mmse_gradient_rep(ch: ScalarChannel) -> float:
    """``sigma2^2 E[(d/dy i(X; Y))^2]`` over the joint law of ``(X, N)``."""
    xs, px = _prior_rule(ch)
    z, wz = _panel_rule()
    s = ch.sigma
    total = 0.0
    for x, p in zip(xs, px):
        score = (x - np.asarray(tre_mean(ch, x + s * z))) / ch.sigma2
        total += p * float(np.sum(wz * score**2))
    return ch.sigma2**2 * total


def mmse_hessian_rep(ch: ScalarChannel) -> float:
    """``-sigma2^2 E[d^2/dy^2 i(X; Y)] = E_Y[kappa_{X|Y}(2)]`` from ``log f_Y``."""
    return _output_integral(ch, lambda y: float(hatsell_nolte_variance(ch, y)))


def mmse_reps(ch: ScalarChannel):
    return mmse_gradient_rep(ch), mmse_hessian_rep(ch)


def info_density_conditional_variance(ch: ScalarChannel, x, nodes: int = 64):
    """``Var(i(x; x + N))`` over ``N ~ N(0, sigma2)`` by Gauss-Hermite."""
    t, w = _hermite_rule(nodes)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    vals = np.asarray(info_density(ch, x[:, None], x[:, None] + ch.sigma * t))
    m = vals @ w
    out = ((vals - m[:, None]) ** 2) @ w
    return out if out.size > 1 else float(out[0])


def poincare_lower_bound(ch: ScalarChannel, nodes: int = 64) -> float:
    """``sigma2 E_X[Var(i(X; X + N) | X)]``, a lower bound on the MMSE."""
    xs, px = _prior_rule(ch, nodes)
    v = np.atleast_1d(info_density_conditional_variance(ch, xs, nodes))
    return ch.sigma2 * float(np.dot(px, v))


@dataclass(frozen=True)
class MmseReport:
    sigma2: float
    mmse_exact: float
    mmse_gradient_rep: float
    mmse_hessian_rep: float
    poincare_lower: float

    def consistent(self, tol: float = 1e-5) -> bool:
        reps = (self.mmse_gradient_rep, self.mmse_hessian_rep)
        return all(abs(r - self.mmse_exact) <= tol for r in reps) and self.poincare_lower <= self.mmse_exact + 1e-6

    def as_dict(self) -> dict:
        return asdict(self)


def mmse_report(ch: ScalarChannel) -> MmseReport:
    return MmseReport(
        ch.sigma2, mmse_exact(ch), mmse_gradient_rep(ch), mmse_hessian_rep(ch), poincare_lower_bound(ch)
    )


# closed forms for X ~ N(0, 1)


def gaussian_mmse(sigma2):
    sigma2 = np.asarray(sigma2, dtype=float)
    return sigma2 / (1.0 + sigma2)


def gaussian_poincare_bound(sigma2):
    sigma2 = np.asarray(sigma2, dtype=float)
    return sigma2 / (1.0 + sigma2) - 0.5 * sigma2 / (1.0 + sigma2) ** 2


def gaussian_info_variance(x, sigma2: float):
    """``Var(i(x; x + N))`` for a standard Gaussian prior."""
    x = np.asarray(x, dtype=float)
    return (0.5 + sigma2 * x * x) / (1.0 + sigma2) ** 2
