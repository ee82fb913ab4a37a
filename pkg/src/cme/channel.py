"""Priors, the scalar Gaussian channel Y = X + N and its posterior oracle.

The channel owns the output density ``f_Y`` and its derivatives.  All
derivative information is exposed as *ratios* ``f_Y^{(k)}(y) / f_Y(y)``,
computed from log-space posterior weights, so nothing downstream has to
divide by a density that may have underflowed.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, special

from .errors import CapabilityError, DomainError, NumericError
from .polybasis import MAX_ORDER, cumulants_to_moments, hermite_he_all, moments_to_cumulants

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


# --------------------------------------------------------------------------
# Priors
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscretePrior:
    """Finitely many atoms ``points`` with masses ``probs``."""

    points: Tuple[float, ...]
    probs: Tuple[float, ...]

    def __post_init__(self):
        pts = tuple(float(x) for x in self.points)
        prs = tuple(float(p) for p in self.probs)
        if len(pts) == 0 or len(pts) != len(prs):
            raise DomainError("points and probs must be non-empty and of equal length")
        if any(p < 0 for p in prs):
            raise DomainError("probabilities must be non-negative")
        if abs(math.fsum(prs) - 1.0) > 1e-12:
            raise DomainError(f"probabilities sum to {math.fsum(prs)!r}, not 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probs", prs)

    @property
    def atoms(self) -> np.ndarray:
        return np.asarray(self.points)

    @property
    def weights(self) -> np.ndarray:
        return np.asarray(self.probs)

    def moment(self, k: int) -> float:
        return float(np.dot(self.weights, self.atoms**k))

    def abs_moment(self, k: float) -> float:
        return float(np.dot(self.weights, np.abs(self.atoms) ** k))

    @property
    def mean(self) -> float:
        return self.moment(1)

    @property
    def variance(self) -> float:
        return self.moment(2) - self.mean**2

    @property
    def support_radius(self) -> float:
        return float(np.max(np.abs(self.atoms)))

    @property
    def support_bounds(self) -> Tuple[float, float]:
        a = self.atoms[self.weights > 0]
        return float(a.min()), float(a.max())

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.choice(self.atoms, size=n, p=self.weights)


def two_point(p: float = 0.5, amplitude: float = 1.0) -> DiscretePrior:
    """``P[X = +amplitude] = p``, ``P[X = -amplitude] = 1 - p``."""
    if not 0.0 < p < 1.0:
        raise DomainError("two-point probability must lie in (0, 1)")
    return DiscretePrior((-amplitude, amplitude), (1.0 - p, p))


def uniform_atoms(points: Sequence[float]) -> DiscretePrior:
    n = len(points)
    return DiscretePrior(tuple(points), (1.0 / n,) * n)


@dataclass(frozen=True)
class GaussianPrior:
    mean: float = 0.0
    variance: float = 1.0

    def __post_init__(self):
        if not self.variance > 0:
            raise DomainError("Gaussian prior variance must be positive")

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)

    def logpdf(self, x):
        return -0.5 * (x - self.mean) ** 2 / self.variance - LOG_SQRT_2PI - 0.5 * math.log(self.variance)

    def moment(self, k: int) -> float:
        if k == 0:
            return 1.0
        kappas = ([self.mean, self.variance] + [0.0] * k)[:k]
        return float(cumulants_to_moments(kappas)[k - 1])

    def abs_moment(self, k: float) -> float:
        if self.mean == 0.0:
            return self.sd**k * 2 ** (k / 2) * math.gamma((k + 1) / 2) / math.sqrt(math.pi)
        val, _ = integrate.quad(
            lambda x: abs(x) ** k * math.exp(self.logpdf(x)), -np.inf, np.inf, epsabs=1e-13
        )
        return val

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(self.mean, self.sd, size=n)


@dataclass(frozen=True)
class SpherePrior:
    """Uniform law on the sphere ``{x in R^dim : |x| = radius}`` (vector only)."""

    radius: float = 1.0
    dim: int = 3

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("sphere radius must be positive")
        if self.dim < 1:
            raise DomainError("sphere dimension must be >= 1")


Prior = Union[DiscretePrior, GaussianPrior, SpherePrior]


# --------------------------------------------------------------------------
# Scalar channel
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarChannel:
    """``Y = X + N`` with ``N ~ N(0, sigma2)`` independent of ``X ~ prior``."""

    prior: Prior
    sigma2: float = 1.0

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise DomainError("noise variance must be positive")
        if isinstance(self.prior, SpherePrior):
            raise CapabilityError("sphere priors are vector-only; use multivar.VectorChannel")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def output_mean(self) -> float:
        return self.prior.mean

    @property
    def output_sd(self) -> float:
        return math.sqrt(self.prior.variance + self.sigma2)

    # -- posterior weights (discrete priors) -------------------------------

    def _log_weights(self, y: np.ndarray) -> np.ndarray:
        x = self.prior.atoms
        with np.errstate(divide="ignore"):
            logp = np.log(self.prior.weights)
        return logp - 0.5 * (y[..., None] - x) ** 2 / self.sigma2

    def posterior_weights(self, y) -> np.ndarray:
        """``P[X = x_i | Y = y]``; trailing axis indexes the atoms."""
        if not isinstance(self.prior, DiscretePrior):
            raise CapabilityError("posterior weights exist only for discrete priors")
        lw = self._log_weights(np.asarray(y, dtype=float))
        w = np.exp(lw - lw.max(axis=-1, keepdims=True))
        return w / w.sum(axis=-1, keepdims=True)

    def posterior_variance(self, y):
        """``Var(X | Y = y)`` as a centred posterior sum (no cancellation)."""
        y = np.asarray(y, dtype=float)
        if isinstance(self.prior, DiscretePrior):
            w = self.posterior_weights(y)
            m = np.sum(w * self.prior.atoms, axis=-1, keepdims=True)
            out = np.sum(w * (self.prior.atoms - m) ** 2, axis=-1)
        else:
            v = self.prior.variance
            out = np.full(y.shape, v * self.sigma2 / (v + self.sigma2))
        return out if out.ndim else float(out)

    # -- output density ----------------------------------------------------

    def log_density(self, y):
        y = np.asarray(y, dtype=float)
        if isinstance(self.prior, DiscretePrior):
            out = special.logsumexp(self._log_weights(y), axis=-1) - LOG_SQRT_2PI - 0.5 * math.log(self.sigma2)
        else:
            tau2 = self.prior.variance + self.sigma2
            out = -0.5 * (y - self.prior.mean) ** 2 / tau2 - LOG_SQRT_2PI - 0.5 * math.log(tau2)
        return out if out.ndim else float(out)

    def density_ratios(self, y, K: int) -> np.ndarray:
        """``[f^{(0)}/f, f^{(1)}/f, ..., f^{(K)}/f]`` stacked on axis 0."""
        if K > MAX_ORDER:
            raise CapabilityError(f"derivative order {K} exceeds {MAX_ORDER}")
        y = np.asarray(y, dtype=float)
        if isinstance(self.prior, DiscretePrior):
            s = self.sigma
            u = (y[..., None] - self.prior.atoms) / s
            w = self.posterior_weights(y)
            he = hermite_he_all(K, u)
            signs = (-1.0) ** np.arange(K + 1) / s ** np.arange(K + 1)
            r = np.sum(he * w, axis=-1)
            return r * signs.reshape((-1,) + (1,) * y.ndim)
        tau = math.sqrt(self.prior.variance + self.sigma2)
        u = (y - self.prior.mean) / tau
        he = hermite_he_all(K, u)
        signs = (-1.0) ** np.arange(K + 1) / tau ** np.arange(K + 1)
        return he * signs.reshape((-1,) + (1,) * y.ndim)

    def density(self, y, k: int = 0):
        """k-th derivative of ``f_Y`` at ``y``."""
        if k < 0:
            raise DomainError("derivative order must be >= 0")
        r = self.density_ratios(y, k)[k]
        out = np.exp(self.log_density(y)) * r
        return out if np.ndim(out) else float(out)

    def log_density_derivatives(self, y, K: int) -> np.ndarray:
        """``[(log f)', ..., (log f)^{(K)}]`` on axis 0.

        The derivatives of ``log f`` are the "cumulants" of the ratio
        sequence ``f^{(j)}/f`` (Faa di Bruno).
        """
        r = self.density_ratios(y, K)
        return np.asarray(moments_to_cumulants(list(r[1:])))

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        if isinstance(self.prior, DiscretePrior):
            z = (y[..., None] - self.prior.atoms) / self.sigma
            out = np.sum(self.prior.weights * special.ndtr(z), axis=-1)
        else:
            out = special.ndtr((y - self.prior.mean) / self.output_sd)
        return out if out.ndim else float(out)


def marginal_density(ch: ScalarChannel, y, k: int = 0):
    """Exact k-th derivative of the output density ``f_Y`` at ``y``."""
    return ch.density(y, k)


# --------------------------------------------------------------------------
# Sets for conditioning
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Region:
    """Finite union of closed intervals plus a finite atom set."""

    intervals: Tuple[Tuple[float, float], ...] = ()
    atoms: Tuple[float, ...] = ()

    @classmethod
    def interval(cls, lo: float = -math.inf, hi: float = math.inf) -> "Region":
        return cls(intervals=((float(lo), float(hi)),))

    @classmethod
    def points(cls, *xs: float) -> "Region":
        return cls(atoms=tuple(float(x) for x in xs))

    @classmethod
    def outside(cls, t: float) -> "Region":
        """``R minus (-t, t)``."""
        return cls(intervals=((-math.inf, -float(t)), (float(t), math.inf)))

    @classmethod
    def full(cls) -> "Region":
        return cls.interval()

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        hit = np.zeros(x.shape, dtype=bool)
        for lo, hi in self.intervals:
            hit |= (x >= lo) & (x <= hi)
        for a in self.atoms:
            hit |= x == a
        return hit


# --------------------------------------------------------------------------
# Posterior oracle
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PosteriorOracle:
    """Brute-force Bayes rule: exact sums or adaptive Gauss-Kronrod.

    For continuous priors every posterior integral is
    ``int p(x) phi_{sigma2}(y - x) h(x) dx`` evaluated with
    ``scipy.integrate.quad`` on a window centred at the dominant mode of
    the integrand, with the log-integrand shifted by its maximum.
    """

    channel: ScalarChannel
    atol: float = 1e-10
    limit: int = 200
    window: float = 24.0

    # -- continuous helpers ------------------------------------------------

    def _log_kernel(self, x, y):
        s2 = self.channel.sigma2
        return self.channel.prior.logpdf(x) - 0.5 * (y - x) ** 2 / s2

    def _mode_and_width(self, y: float) -> Tuple[float, float]:
        pr = self.channel.prior
        width = min(pr.sd, self.channel.sigma)
        lo = min(pr.mean, y) - 10 * max(pr.sd, self.channel.sigma)
        hi = max(pr.mean, y) + 10 * max(pr.sd, self.channel.sigma)
        xs = np.linspace(lo, hi, 4001)
        lk = self._log_kernel(xs, y)
        return float(xs[int(np.argmax(lk))]), width

    def _integrate(self, h, y: float, region: Optional[Region] = None) -> float:
        centre, width = self._mode_and_width(y)
        shift = float(self._log_kernel(centre, y))
        lo, hi = centre - self.window * width, centre + self.window * width
        pieces = [(lo, hi)]
        if region is not None:
            if region.atoms and not region.intervals:
                return 0.0
            pieces = [(max(lo, a), min(hi, b)) for a, b in region.intervals]
            pieces = [(a, b) for a, b in pieces if b > a]
        total = 0.0

        def f(x):
            return math.exp(self._log_kernel(x, y) - shift) * h(x)

        for a, b in pieces:
            with warnings.catch_warnings():
                warnings.simplefilter("error", integrate.IntegrationWarning)
                try:
                    val, err = integrate.quad(
                        f, a, b, epsabs=self.atol * 1e-2, epsrel=1e-13, limit=self.limit,
                        points=[centre] if a < centre < b else None,
                    )
                except integrate.IntegrationWarning as exc:
                    raise NumericError(f"posterior quadrature did not converge at y={y}: {exc}") from exc
            if err > self.atol * width:
                raise NumericError(f"posterior quadrature achieved only {err:.3g} at y={y}")
            total += val
        return total

    # -- public surface ----------------------------------------------------

    def posterior_moment(self, k: int, y):
        """``E[X^k | Y = y]``."""
        if k < 0:
            raise DomainError("moment order must be >= 0")
        pr = self.channel.prior
        if isinstance(pr, DiscretePrior):
            w = self.channel.posterior_weights(y)
            out = np.sum(w * pr.atoms**k, axis=-1)
            return out if np.ndim(out) else float(out)
        ys = np.asarray(y, dtype=float)
        vals = np.array([
            self._integrate(lambda x: x**k, yy) / self._integrate(lambda x: 1.0, yy)
            for yy in ys.ravel()
        ]).reshape(ys.shape)
        return vals if vals.ndim else float(vals)

    def posterior_moments(self, y, K: int) -> np.ndarray:
        """``E[X^j | Y = y]`` for ``j = 1..K`` on axis 0."""
        return np.asarray([self.posterior_moment(j, y) for j in range(1, K + 1)])

    def posterior_variance(self, y):
        m1 = self.posterior_moment(1, y)
        return self.posterior_moment(2, y) - m1 * m1

    def _prior_mass(self, region: Region) -> float:
        pr = self.channel.prior
        if isinstance(pr, DiscretePrior):
            return float(np.sum(pr.weights[region.contains(pr.atoms)]))
        total = 0.0
        for a, b in region.intervals:
            total += special.ndtr((b - pr.mean) / pr.sd) - special.ndtr((a - pr.mean) / pr.sd)
        return float(total)

    def posterior_set_probability(self, region: Region, y):
        """``P[X in A | Y = y]``."""
        if self._prior_mass(region) <= 0:
            raise DomainError("conditioning set has zero prior mass")
        pr = self.channel.prior
        if isinstance(pr, DiscretePrior):
            w = self.channel.posterior_weights(y)
            out = np.sum(w * region.contains(pr.atoms), axis=-1)
            return out if np.ndim(out) else float(out)
        ys = np.asarray(y, dtype=float)
        vals = np.array([
            self._integrate(lambda x: 1.0, yy, region) / self._integrate(lambda x: 1.0, yy)
            for yy in ys.ravel()
        ]).reshape(ys.shape)
        return vals if vals.ndim else float(vals)

    def posterior_moment_on_set(self, k: int, region: Region, y):
        """``E[X^k | Y = y, X in A]``."""
        if self._prior_mass(region) <= 0:
            raise DomainError("conditioning set has zero prior mass")
        pr = self.channel.prior
        if isinstance(pr, DiscretePrior):
            w = self.channel.posterior_weights(y) * region.contains(pr.atoms)
            out = np.sum(w * pr.atoms**k, axis=-1) / np.sum(w, axis=-1)
            return out if np.ndim(out) else float(out)
        ys = np.asarray(y, dtype=float)
        vals = np.array([
            self._integrate(lambda x: x**k, yy, region) / self._integrate(lambda x: 1.0, yy, region)
            for yy in ys.ravel()
        ]).reshape(ys.shape)
        return vals if vals.ndim else float(vals)


def posterior_moment(oracle: PosteriorOracle, k: int, y):
    return oracle.posterior_moment(k, y)


def posterior_set_probability(oracle: PosteriorOracle, region: Region, y):
    return oracle.posterior_set_probability(region, y)


def posterior_moment_on_set(oracle: PosteriorOracle, k: int, region: Region, y):
    return oracle.posterior_moment_on_set(k, region, y)


# --------------------------------------------------------------------------
# Prior specification files
# --------------------------------------------------------------------------

_SPEC_KEYS = {"kind", "points", "probs", "mean", "variance", "p", "radius", "dim", "sigma2"}
_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.+?)\s*$")


def _parse_value(raw: str):
    raw = raw.strip()
    if raw.startswith("[") and raw.endswith("]"):
        body = raw[1:-1].strip()
        try:
            return [float(v) for v in body.split(",") if v.strip()] if body else []
        except ValueError as exc:
            raise DomainError(f"list entries must be numbers: {raw!r}") from exc
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        return raw[1:-1]
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def parse_prior_spec(text: str) -> dict:
    """Parse the ``key = value`` prior format (a TOML subset).

    One assignment per line; ``#`` starts a comment; values are numbers,
    quoted or bare strings, or bracketed comma-separated number lists.
    """
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise DomainError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = m.group(1), m.group(2)
        if key not in _SPEC_KEYS:
            raise DomainError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise DomainError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _parse_value(raw)
    if "kind" not in out:
        raise DomainError("prior spec needs a 'kind'")
    return out


def prior_from_spec(spec: dict) -> Prior:
    kind = str(spec["kind"]).lower().replace("-", "_")
    try:
        if kind in ("discrete", "atoms"):
            pts = spec["points"]
            probs = spec.get("probs") or [1.0 / len(pts)] * len(pts)
            return DiscretePrior(tuple(pts), tuple(probs))
        if kind == "gaussian":
            return GaussianPrior(float(spec.get("mean", 0.0)), float(spec.get("variance", 1.0)))
        if kind == "two_point":
            return two_point(float(spec.get("p", 0.5)))
        if kind == "sphere":
            return SpherePrior(float(spec.get("radius", 1.0)), int(spec.get("dim", 3)))
    except KeyError as exc:
        raise DomainError(f"prior kind {kind!r} needs key {exc.args[0]!r}") from exc
    raise DomainError(f"unknown prior kind {kind!r}")


def load_prior_spec(path: Union[str, Path]) -> Tuple[Prior, Optional[float]]:
    """Read a prior file; returns the prior and the optional ``sigma2``."""
    spec = parse_prior_spec(Path(path).read_text())
    sigma2 = spec.get("sigma2")
    return prior_from_spec(spec), (float(sigma2) if sigma2 is not None else None)
