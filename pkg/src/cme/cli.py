"""Command-line front end: deterministic CSV tables and identity batteries.

Exit status: 0 success, 1 a check battery failed, 2 invalid input,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import analytic, distributions, empirical_bayes, identities, infodensity, lanczos, mmse, multivar
from .channel import (
    DiscretePrior,
    GaussianPrior,
    PosteriorOracle,
    ScalarChannel,
    SpherePrior,
    load_prior_spec,
    two_point,
    uniform_atoms,
)
from .errors import CapabilityError, DomainError, NumericError, ScheduleError
from .polybasis import moments_to_cumulants

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3


@dataclass
class RunConfig:
    subcommand: str
    prior: Optional[str] = None
    sigma2: Optional[float] = None
    grid: Optional[Tuple[float, float, int]] = None
    k: List[int] = field(default_factory=list)
    h: List[float] = field(default_factory=list)
    seed: int = 0
    seeds: int = 20
    n: List[int] = field(default_factory=list)
    u: float = 0.1
    w: float = 0.05
    estimator: str = "matched"
    q_prior: Optional[str] = None
    slope: Optional[float] = None
    points: int = 401
    relaxed: bool = False
    target: str = "all"
    out: Optional[str] = None

    def header(self) -> List[str]:
        lines = []
        for key, val in asdict(self).items():
            if key == "out":
                continue
            if isinstance(val, (list, tuple)):
                val = ",".join(str(v) for v in val)
            lines.append(f"# {key}={val}")
        return lines


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------


def parse_orders(text: str) -> List[int]:
    """``"1..4"`` -> ``[1, 2, 3, 4]``; ``"2"`` -> ``[2]``; ``"1,3"`` -> ``[1, 3]``."""
    out: List[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError(f"bad order list {text!r}")
    return out


def parse_grid(text: str) -> Tuple[float, float, int]:
    """``"lo:hi:points"``."""
    try:
        lo, hi, n = text.split(":")
        grid = (float(lo), float(hi), int(n))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"grid must be lo:hi:points, got {text!r}") from exc
    lo, hi, n = grid
    if n < 1 or hi < lo or (n == 1) != (hi == lo):
        raise argparse.ArgumentTypeError(f"empty grid {text!r}: need lo < hi and points >= 2, or lo = hi and points = 1")
    return grid


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cme", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp, grid: Optional[str] = "-5:5:201", k: Optional[str] = None):
        sp.add_argument("--prior", help="prior specification file")
        sp.add_argument("--sigma2", type=float, help="noise variance (overrides the prior file)")
        if grid is not None:
            sp.add_argument("--grid", type=parse_grid, default=parse_grid(grid), help="lo:hi:points")
        if k is not None:
            sp.add_argument("--k", type=parse_orders, default=parse_orders(k), help="orders, e.g. 1..4")
        sp.add_argument("--out", help="output CSV path (default: stdout)")
        return sp

    common(sub.add_parser("moments", help="conditional moments E[X^k|Y=y]"), k="1..4")
    common(sub.add_parser("cumulants", help="conditional cumulants"), k="1..4")
    common(sub.add_parser("inverse", help="inverse of the conditional mean"), grid="-0.9:0.9:37")
    sp = common(sub.add_parser("pdf-ce", help="law of the conditional-mean estimate"), grid=None)
    sp.add_argument("--points", type=int, default=401)
    sp = common(sub.add_parser("pdf-error", help="law of the estimation error"), grid="-2.5:2.5:501")
    sp.add_argument("--estimator", choices=["matched", "mismatched", "linear"], default="matched")
    sp.add_argument("--q-prior", help="prior file for the mismatched estimator")
    sp.add_argument("--slope", type=float, help="slope of the linear estimator (default 1/(1+sigma2))")
    sp = common(sub.add_parser("mmse", help="exact MMSE and Poincare lower bound"), grid="-2:2:20")
    eb_help = {
        "eb-moments": "sup-error of the sample-only moment estimate across n",
        "eb-cumulants": "sup-error of the sample-only cumulant estimate across n",
    }
    for name, text in eb_help.items():
        sp = common(sub.add_parser(name, help=text), grid=None, k="1")
        sp.add_argument("--n", type=int, action="append", help="sample size (repeatable)")
        sp.add_argument("--seed", type=int, default=0, help="first seed")
        sp.add_argument("--seeds", type=int, default=20, help="number of consecutive seeds")
        sp.add_argument("--u", type=float, default=0.1)
        sp.add_argument("--w", type=float, default=0.05)
        sp.add_argument("--points", type=int, default=41, help="points on |y| <= t_n")
        if name == "eb-cumulants":
            sp.add_argument("--relaxed", action="store_true", help="admit runs with h > t_n/2")
    sp = common(sub.add_parser("lanczos-demo", help="Lanczos approximation of the conditional mean"))
    sp.add_argument("--h", type=float, action="append", help="step (repeatable)")
    sp = sub.add_parser("vector-check", help="vector identity battery")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp = sub.add_parser("check", help="identity batteries")
    sp.add_argument("target", nargs="?", choices=["identities", "vector", "all"], default="all")
    sp.add_argument("--all", action="store_true", help="run every battery (same as target 'all')")
    sp.add_argument("--out")
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(ns.subcommand)
    for key in asdict(cfg):
        if key == "grid" and hasattr(ns, "grid"):
            cfg.grid = ns.grid
        elif key != "subcommand" and getattr(ns, key, None) is not None:
            setattr(cfg, key, getattr(ns, key))
    if getattr(ns, "all", False):
        cfg.target = "all"
    if cfg.subcommand in ("eb-moments", "eb-cumulants"):
        if not cfg.n:
            cfg.n = [1000, 10000, 100000]
    if cfg.subcommand == "lanczos-demo" and not cfg.h:
        cfg.h = [0.1, 0.5]
    if cfg.seeds < 1:
        raise DomainError("--seeds must be >= 1")
    return cfg


# --------------------------------------------------------------------------
# Helpers
# --------------------------------------------------------------------------


def _scalar_channel(cfg: RunConfig, default=None) -> ScalarChannel:
    if cfg.prior:
        prior, s2 = load_prior_spec(cfg.prior)
    else:
        prior, s2 = (default or two_point(0.5)), None
    if isinstance(prior, SpherePrior):
        raise CapabilityError("this subcommand needs a scalar prior")
    sigma2 = cfg.sigma2 if cfg.sigma2 is not None else (s2 if s2 is not None else 1.0)
    cfg.sigma2 = sigma2
    return ScalarChannel(prior, sigma2)


def _grid(cfg: RunConfig) -> np.ndarray:
    lo, hi, n = cfg.grid
    return np.linspace(lo, hi, n)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return "%.17g" % float(v)


def write_csv(cfg: RunConfig, columns: Sequence[str], rows, extra_header: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in cfg.header():
        buf.write(line + "\n")
    for line in extra_header:
        buf.write(f"# {line}\n")
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(columns)
    out.writerows([_fmt(v) for v in row] for row in rows)
    text = buf.getvalue()
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    return text


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def cmd_moments(cfg: RunConfig) -> int:
    ch = _scalar_channel(cfg, uniform_atoms([-2.0, 0.0, 2.0]))
    y = _grid(cfg)
    cols = [np.asarray(identities.moment_via_bell(ch, k, y)) for k in cfg.k]
    write_csv(cfg, ["y"] + [f"m{k}" for k in cfg.k], zip(y, *cols))
    return EXIT_OK


def cmd_cumulants(cfg: RunConfig) -> int:
    ch = _scalar_channel(cfg, uniform_atoms([-2.0, 0.0, 2.0]))
    y = _grid(cfg)
    kap = identities.conditional_cumulants(ch, y, max(cfg.k))
    write_csv(cfg, ["y"] + [f"kappa{k}" for k in cfg.k], zip(y, *[kap[k - 1] for k in cfg.k]))
    return EXIT_OK


def cmd_inverse(cfg: RunConfig) -> int:
    ch = _scalar_channel(cfg)
    x = _grid(cfg)
    y_root = np.asarray(analytic.ce_inverse_eval(ch, x))
    rows = []
    for xv, yr in zip(x, y_root):
        ys, K = analytic.series_inverse_eval(ch, float(xv))
        rows.append((xv, yr, ys, "root" if K is None else K))
    write_csv(cfg, ["x", "y", "y_series", "series_order"], rows)
    return EXIT_OK


def cmd_pdf_ce(cfg: RunConfig) -> int:
    ch = _scalar_channel(cfg, uniform_atoms([-6.0, -3.0, 0.0, 3.0, 6.0]))
    law = distributions.EstimatorLaw.on_grid(ch, cfg.points)
    write_csv(cfg, ["x", "pdf", "cdf"], zip(law.x, law.pdf, law.cdf))
    return EXIT_OK


def cmd_pdf_error(cfg: RunConfig) -> int:
    ch = _scalar_channel(cfg)
    if cfg.estimator == "matched":
        g = distributions.matched_estimator(ch)
    elif cfg.estimator == "mismatched":
        if not cfg.q_prior:
            raise DomainError("--q-prior is required for the mismatched estimator")
        q, _ = load_prior_spec(cfg.q_prior)
        if isinstance(q, GaussianPrior):
            # conditional mean under a Gaussian prior is linear
            g = distributions.LinearEstimator(q.variance / (q.variance + ch.sigma2), q.mean * ch.sigma2 / (q.variance + ch.sigma2))
        else:
            g = distributions.mismatched_estimator(q, ch.sigma2)
    else:
        slope = cfg.slope if cfg.slope is not None else 1.0 / (1.0 + ch.sigma2)
        g = distributions.LinearEstimator(slope)
    w = _grid(cfg)
    write_csv(cfg, ["w", "pdf"], zip(w, distributions.error_pdf(ch, g, w)))
    return EXIT_OK


def cmd_mmse(cfg: RunConfig) -> int:
    # grid is in log10(sigma2)
    base = _scalar_channel(cfg, GaussianPrior())
    s2_grid = 10.0 ** _grid(cfg)
    rows = []
    for s2 in s2_grid:
        ch = ScalarChannel(base.prior, float(s2))
        rows.append((s2, mmse.mmse_exact(ch), mmse.poincare_lower_bound(ch)))
    write_csv(cfg, ["sigma2", "mmse", "lower_bound"], rows, ["grid is log10(sigma2)"])
    return EXIT_OK


def _eb(cfg: RunConfig, kind: str) -> int:
    ch = _scalar_channel(cfg)
    if len(cfg.k) != 1:
        raise DomainError("give a single order --k")
    seeds = list(range(cfg.seed, cfg.seed + cfg.seeds))
    res = empirical_bayes.consistency_experiment(
        ch, cfg.k[0], cfg.n, seeds, cfg.u, cfg.w, kind=kind, grid_points=cfg.points, strict=not cfg.relaxed
    )
    med = res.medians()
    extra = [f"median_n{n}={_fmt(v)}" for n, v in med.items()] + [f"slope={_fmt(res.slope())}"]
    rows = [(r.n, r.seed, r.k, r.sup_error, r.t_n, r.a, r.h) for r in res.rows]
    write_csv(cfg, ["n", "seed", "k", "sup_error", "t_n", "a", "h"], rows, extra)
    return EXIT_OK


def cmd_lanczos_demo(cfg: RunConfig) -> int:
    ch = _scalar_channel(cfg)
    y = _grid(cfg)
    exact = np.asarray(identities.tre_mean(ch, y))
    cols, names = [exact], ["y", "exact"]
    for h in cfg.h:
        approx = y + ch.sigma2 * np.asarray(lanczos.LanczosOperator(1, h)(ch.log_density, y))
        cols += [approx, np.abs(approx - exact)]
        names += [f"approx_h{h:g}", f"error_h{h:g}"]
    write_csv(cfg, names, zip(y, *cols))
    return EXIT_OK


# --------------------------------------------------------------------------
# Check batteries
# --------------------------------------------------------------------------


def identity_battery() -> List[Tuple[str, float, float]]:
    """``(name, residual, tolerance)`` rows for the scalar identities."""
    rows = []
    y = np.linspace(-5, 5, 201)
    priors = {
        "two_point": two_point(0.5),
        "three_atoms": uniform_atoms([-2.0, 0.0, 2.0]),
        "gaussian": GaussianPrior(),
    }
    for name, pr in priors.items():
        ch = ScalarChannel(pr, 1.0)
        yy = y if isinstance(pr, DiscretePrior) else np.linspace(-5, 5, 21)
        oracle = PosteriorOracle(ch)
        m1 = np.asarray(oracle.posterior_moment(1, yy))
        rows.append((f"{name}:tre_vs_oracle", float(np.max(np.abs(identities.tre_mean(ch, yy) - m1))), 1e-8))
        for k in range(1, 5):
            bell = np.asarray(identities.moment_via_bell(ch, k, yy))
            herm = np.asarray(identities.moment_via_generalized_tre(ch, k, yy))
            orac = np.asarray(oracle.posterior_moment(k, yy))
            rows.append((f"{name}:bell_vs_hermite_k{k}", float(np.max(np.abs(bell - herm))), 1e-8))
            rows.append((f"{name}:bell_vs_oracle_k{k}", float(np.max(np.abs(bell - orac))), 1e-6))
        mom = oracle.posterior_moments(yy, 4)
        kap = moments_to_cumulants(list(mom))
        for k in range(1, 5):
            dev = np.max(np.abs(np.asarray(identities.conditional_cumulant(ch, k, yy)) - kap[k - 1]))
            rows.append((f"{name}:cumulant_k{k}", float(dev), 1e-5))
        hstep = 1e-4
        for k in range(1, 4):
            fd = (np.asarray(identities.conditional_cumulant(ch, k, yy + hstep))
                  - np.asarray(identities.conditional_cumulant(ch, k, yy - hstep))) / (2 * hstep)
            dev = np.max(np.abs(ch.sigma2 * fd - np.asarray(identities.conditional_cumulant(ch, k + 1, yy))))
            rows.append((f"{name}:cumulant_recursion_k{k}", float(dev), 2e-4))
        var_dev = np.max(np.abs(np.asarray(identities.hatsell_nolte_variance(ch, yy)) - np.asarray(oracle.posterior_variance(yy))))
        rows.append((f"{name}:variance_vs_oracle", float(var_dev), 1e-6))
        k2 = np.asarray(infodensity.info_density_dy(ch, 0.0, yy, 2))
        rows.append((f"{name}:info_hessian_concave", float(max(np.max(k2), 0.0)), 0.0))
    return rows


def vector_battery(seed: int = 0) -> List[Tuple[str, float, float]]:
    rng = np.random.default_rng(seed)
    rows = []
    four = multivar.VectorDiscretePrior([[1, 1], [1, -1], [-1, 0.5], [0, -2]], [0.1, 0.2, 0.3, 0.4])
    ch2 = multivar.VectorChannel(four, np.diag([1.0, 2.0]))
    three = multivar.VectorDiscretePrior.uniform(rng.normal(size=(5, 3)))
    ch3 = multivar.VectorChannel(three, np.array([[1.0, 0.3, 0.0], [0.3, 1.5, 0.2], [0.0, 0.2, 0.8]]))
    one = multivar.VectorDiscretePrior.uniform([[-1.0], [1.0]])
    ch1 = multivar.VectorChannel(one, np.eye(1))
    for name, ch, fams in (("n1", ch1, [(2,)]), ("n2", ch2, [(1, 0), (2, 1)]), ("n3", ch3, [(1, 0, 2)])):
        ys = rng.normal(size=(20, ch.dim)) * 1.5
        rows.append((f"{name}:jacobian_U=X", max(multivar.jacobian_identity_check(ch, y) for y in ys), 1e-4))
        for v in fams:
            rows.append((f"{name}:jacobian_U=power{v}",
                         max(multivar.jacobian_identity_check(ch, y, v) for y in ys), 1e-4))
        for k in (1, 2):
            rows.append((f"{name}:matrix_jaffer_k{k}", max(multivar.matrix_jaffer_check(ch, k, y) for y in ys[:5]), 1e-4))
    ys = rng.normal(size=(5, 2))
    rows.append(("n2:diagonal_jaffer", max(multivar.diagonal_jaffer_check(ch2, (1, 1), 0, y) for y in ys), 1e-4))
    rows.append(("n2:cgf_second_partials", max(multivar.cgf_cumulant_check(ch2, y) for y in ys), 1e-4))
    rows.append(("n2:info_hessian", max(multivar.info_hessian_check(ch2, [1.0, 1.0], y) for y in ys), 1e-3))
    sphere = multivar.VectorChannel(SpherePrior(1.0, 3), np.eye(3))
    ys = rng.normal(size=(20, 3))
    rows.append(("sphere3:cumulants", max(multivar.sphere_cumulant_check(sphere, y) for y in ys), 1e-5))
    ys1 = np.linspace(-3, 3, 13)
    ys1 = ys1[ys1 != 0]
    dev = max(abs(multivar.sphere_conditional_mean(1.0, 1, [y])[0] - math.tanh(y)) for y in ys1)
    dev = max(dev, max(abs(multivar.sphere_second_cumulant(1.0, 1, [y], 0, 0) - 1 / math.cosh(y) ** 2) for y in ys1))
    rows.append(("sphere1:reduction", dev, 1e-8))
    return rows


def _battery_csv(cfg: RunConfig, rows) -> int:
    out = [(n, r, t, r <= t) for n, r, t in rows]
    worst = max(r / t if t > 0 else (0.0 if r <= 0 else math.inf) for _, r, t in rows)
    write_csv(cfg, ["check", "residual", "tolerance", "pass"], out, [f"worst_residual_ratio={_fmt(worst)}"])
    print(f"max residual/tolerance = {worst:.3g}", file=sys.stderr)
    return EXIT_OK if all(p for *_, p in out) else EXIT_FAIL


def cmd_vector_check(cfg: RunConfig) -> int:
    return _battery_csv(cfg, vector_battery(cfg.seed))


def cmd_check(cfg: RunConfig) -> int:
    rows = []
    if cfg.target in ("identities", "all"):
        rows += identity_battery()
    if cfg.target in ("vector", "all"):
        rows += vector_battery(cfg.seed)
    return _battery_csv(cfg, rows)


COMMANDS = {
    "moments": cmd_moments,
    "cumulants": cmd_cumulants,
    "inverse": cmd_inverse,
    "pdf-ce": cmd_pdf_ce,
    "pdf-error": cmd_pdf_error,
    "mmse": cmd_mmse,
    "eb-moments": lambda cfg: _eb(cfg, "moment"),
    "eb-cumulants": lambda cfg: _eb(cfg, "cumulant"),
    "lanczos-demo": cmd_lanczos_demo,
    "vector-check": cmd_vector_check,
    "check": cmd_check,
}


def _join_grid(argv: Sequence[str]) -> List[str]:
    # "--grid -5:5:201" would otherwise be read as an unknown option
    out: List[str] = []
    it = iter(argv)
    for tok in it:
        if tok == "--grid":
            nxt = next(it, None)
            out.append(tok if nxt is None else f"--grid={nxt}")
        else:
            out.append(tok)
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(_join_grid(sys.argv[1:] if argv is None else argv))
    try:
        cfg = config_from_args(ns)
        return COMMANDS[cfg.subcommand](cfg)
    except (DomainError, ScheduleError, CapabilityError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
