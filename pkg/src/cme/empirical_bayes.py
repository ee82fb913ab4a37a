"""Conditional moments and cumulants estimated from output samples alone.

A Gaussian kernel density estimate ``f_hat`` replaces ``f_Y`` in the
Hermite moment formula; cumulants follow by Lanczos-differentiating the
estimated conditional mean.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .channel import ScalarChannel
from .errors import DomainError, NumericError, ScheduleError
from .identities import conditional_cumulant, hermite_moment, moment_via_generalized_tre
from .lanczos import LanczosOperator
from .polybasis import hermite_he_all

_CHUNK = 2_000_000  # sample-by-point products per block


@dataclass(frozen=True)
class SampleSet:
    """i.i.d. outputs ``Y_1..Y_n`` of a channel with known ``sigma2``."""

    y: np.ndarray = field(repr=False)
    sigma2: float
    seed: Optional[int] = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        if y.size < 2:
            raise DomainError("need at least two samples")
        if not self.sigma2 > 0:
            raise DomainError("sigma2 must be positive")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.size


def make_rng(seed: Optional[int]) -> np.random.Generator:
    """64-bit PCG generator."""
    return np.random.Generator(np.random.PCG64(seed))


def draw_samples(ch: ScalarChannel, n: int, seed: Optional[int] = None) -> SampleSet:
    rng = make_rng(seed)
    x = ch.prior.sample(rng, n)
    noise = rng.normal(0.0, ch.sigma, size=n)
    return SampleSet(x + noise, ch.sigma2, seed)


@dataclass(frozen=True)
class KdeModel:
    """``f_hat(y) = (1/n) sum_i phi((y - Y_i)/a) / a`` with a standard Gaussian kernel."""

    samples: SampleSet
    bandwidth: float

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise DomainError("bandwidth must be positive")

    @property
    def sigma2(self) -> float:
        return self.samples.sigma2

    def _blocks(self, y: np.ndarray):
        step = max(1, _CHUNK // self.samples.n)
        for s in range(0, y.size, step):
            yield s, y[s : s + step]

    def log_density_and_ratios(self, y, R: int):
        """``log f_hat(y)`` and ``f_hat^{(r)}/f_hat`` for ``r = 0..R`` (axis 0).

        Ratios are posterior-style weighted sums over the samples, so they
        stay finite where ``f_hat`` itself underflows.
        """
        y = np.asarray(y, dtype=float)
        flat = y.ravel()
        a = self.bandwidth
        logf = np.empty(flat.size)
        ratios = np.empty((R + 1, flat.size))
        scale = ((-1.0) ** np.arange(R + 1) / a ** np.arange(R + 1))[:, None]
        for s, yb in self._blocks(flat):
            u = (yb[:, None] - self.samples.y[None, :]) / a
            lk = -0.5 * u * u
            m = lk.max(axis=1, keepdims=True)
            wts = np.exp(lk - m)
            tot = wts.sum(axis=1)
            logf[s : s + yb.size] = (
                m[:, 0] + np.log(tot) - math.log(self.samples.n * a) - 0.5 * math.log(2 * math.pi)
            )
            wts /= tot[:, None]
            he = hermite_he_all(R, u)
            ratios[:, s : s + yb.size] = np.einsum("rij,ij->ri", he, wts) * scale
        if not np.all(np.isfinite(ratios)):
            raise NumericError("kernel density ratios are not finite")
        return logf.reshape(y.shape), ratios.reshape((R + 1,) + y.shape)


def kde_density(model: KdeModel, y, r: int = 0):
    """``r``-th derivative of the kernel density estimate."""
    if not 0 <= r <= 8:
        raise DomainError("derivative order must lie in 0..8")
    logf, ratios = model.log_density_and_ratios(y, r)
    out = np.exp(logf) * ratios[r]
    return out if np.ndim(out) else float(out)


def eb_conditional_moment(model: KdeModel, k: int, y):
    """``m_hat_k(y)``: the Hermite moment formula with ``f_hat`` for ``f_Y``."""
    if k < 1:
        raise DomainError("k must be >= 1")
    y = np.asarray(y, dtype=float)
    _, ratios = model.log_density_and_ratios(y, k)
    out = np.asarray(hermite_moment(ratios, k, y, model.sigma2))
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# Schedules
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EbSchedule:
    """Bandwidth, evaluation window and Lanczos step as functions of ``n``.

    ``a = n^-u`` and ``t_n = sigma2 sqrt(w log n) / 3`` with
    ``0 < u < 1/(2k+4)`` and ``0 < w < u``.  With ``cumulant=True`` the
    Lanczos step is ``h = eps_n^{1/(k+2)}``, where
    ``eps_n = 2 a max_m sqrt(4 (m+1)! / (3 pi sigma2^{m+1}))`` over the
    kernel-derivative orders ``m = 0..moment_order`` that ``m_hat`` uses.
    Runs need ``h <= t_n / 2``; ``strict=False`` records a violation
    instead of raising.
    """

    k: int
    u: float
    w: float
    sigma2: float = 1.0
    cumulant: bool = False
    moment_order: int = 1
    strict: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ScheduleError("k must be >= 1")
        if not 0 < self.u < 1.0 / (2 * self.k + 4):
            raise ScheduleError(f"u={self.u} must lie in (0, {1 / (2 * self.k + 4):.6g})")
        if not 0 < self.w < self.u:
            raise ScheduleError(f"w={self.w} must lie in (0, u={self.u})")
        if not self.sigma2 > 0:
            raise ScheduleError("sigma2 must be positive")

    def bandwidth(self, n: int) -> float:
        return float(n) ** (-self.u)

    def window(self, n: int) -> float:
        return self.sigma2 * math.sqrt(self.w * math.log(n)) / 3.0

    def epsilon(self, n: int) -> float:
        a = self.bandwidth(n)
        c = max(
            math.sqrt(4.0 * math.factorial(m + 1) / (3.0 * math.pi * self.sigma2 ** (m + 1)))
            for m in range(self.moment_order + 1)
        )
        return 2.0 * a * c

    def step(self, n: int) -> Optional[float]:
        if not self.cumulant:
            return None
        return self.epsilon(n) ** (1.0 / (self.k + 2))

    def admissible(self, n: int) -> bool:
        h = self.step(n)
        return h is None or h <= self.window(n) / 2.0

    def check(self, n: int) -> bool:
        ok = self.admissible(n)
        if not ok and self.strict:
            raise ScheduleError(
                f"n={n}: Lanczos step h={self.step(n):.4g} exceeds t_n/2={self.window(n) / 2:.4g}"
            )
        return ok


def eb_conditional_cumulant(model: KdeModel, k: int, y, h: float, nodes: int = 64):
    """``kappa_hat(k+1)(y) = sigma2^k D_h^{(k)} m_hat_1(y)``."""
    if k < 1:
        raise DomainError("k must be >= 1")
    op = LanczosOperator(k, h, nodes)
    out = model.sigma2**k * np.asarray(op(lambda t: eb_conditional_moment(model, 1, t), y))
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# Consistency experiment
# --------------------------------------------------------------------------


def _threads() -> int:
    env = os.environ.get("CME_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, cap)


@dataclass(frozen=True)
class ConsistencyRow:
    n: int
    seed: int
    k: int
    sup_error: float
    t_n: float
    a: float
    h: float
    admissible: bool = True


@dataclass(frozen=True)
class ConsistencyResult:
    rows: List[ConsistencyRow]
    kind: str

    def medians(self) -> Dict[int, float]:
        out: Dict[int, float] = {}
        for n in sorted({r.n for r in self.rows}):
            out[n] = float(np.median([r.sup_error for r in self.rows if r.n == n]))
        return out

    def quantiles(self, q: Sequence[float] = (0.1, 0.5, 0.9)) -> Dict[int, np.ndarray]:
        return {
            n: np.quantile([r.sup_error for r in self.rows if r.n == n], q)
            for n in sorted({r.n for r in self.rows})
        }

    def slope(self) -> float:
        """Least-squares slope of log median error against log n."""
        med = self.medians()
        if len(med) < 2:
            return float("nan")
        ns = np.log(np.array(list(med.keys()), dtype=float))
        return float(np.polyfit(ns, np.log(list(med.values())), 1)[0])

    def strictly_decreasing(self) -> bool:
        vals = list(self.medians().values())
        return all(b < a for a, b in zip(vals[:-1], vals[1:]))


def consistency_experiment(
    ch: ScalarChannel,
    k: int,
    n_list: Sequence[int],
    seeds: Sequence[int],
    u: float,
    w: float,
    kind: str = "moment",
    grid_points: int = 41,
    strict: bool = True,
    nodes: int = 64,
) -> ConsistencyResult:
    """Sup-error of ``m_hat_k`` (``kind="moment"``) or ``kappa_hat(k+1)``
    (``kind="cumulant"``) over ``|y| <= t_n``, for each ``n`` and seed.

    Truth comes from the exact identities with the analytic ``f_Y``.
    """
    if kind not in ("moment", "cumulant"):
        raise DomainError(f"unknown kind {kind!r}")
    sched = EbSchedule(k, u, w, ch.sigma2, cumulant=(kind == "cumulant"), strict=strict)

    def one(n: int, seed: int) -> ConsistencyRow:
        ok = sched.check(n)
        t_n, a, h = sched.window(n), sched.bandwidth(n), sched.step(n)
        ys = np.linspace(-t_n, t_n, grid_points)
        model = KdeModel(draw_samples(ch, n, seed), a)
        if kind == "moment":
            est = np.asarray(eb_conditional_moment(model, k, ys))
            truth = np.asarray(moment_via_generalized_tre(ch, k, ys))
        else:
            est = np.asarray(eb_conditional_cumulant(model, k, ys, h, nodes))
            truth = np.asarray(conditional_cumulant(ch, k + 1, ys))
        return ConsistencyRow(int(n), int(seed), k, float(np.max(np.abs(est - truth))), t_n, a,
                              float("nan") if h is None else h, ok)

    jobs = [(n, s) for n in n_list for s in seeds]
    workers = min(_threads(), len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(lambda job: one(*job), jobs))
    else:
        rows = [one(n, s) for n, s in jobs]
    return ConsistencyResult(rows, kind)
