"""Write the CSV behind every figure into one directory.

    python scripts/reproduce_figures.py [outdir]
"""

import sys
import time
from pathlib import Path

from cme.cli import main

PRIORS = Path(__file__).resolve().parents[1] / "priors"

RUNS = {
    "lanczos_tanh.csv": ["lanczos-demo", "--h", "0.1", "--h", "0.5"],
    "moments_three_atoms.csv": ["moments", "--prior", PRIORS / "three_atoms.toml", "--k", "1..4", "--grid", "-5:5:201"],
    "cumulants_three_atoms.csv": ["cumulants", "--prior", PRIORS / "three_atoms_wide.toml", "--k", "1..4", "--grid", "-5:5:201"],
    "estimator_law_five_atoms.csv": ["pdf-ce", "--prior", PRIORS / "five_atoms.toml", "--points", "401"],
    "error_law_two_point.csv": ["pdf-error", "--prior", PRIORS / "two_point.toml", "--grid", "-2:2:401"],
    "error_law_two_point_linear.csv": [
        "pdf-error", "--prior", PRIORS / "two_point.toml", "--estimator", "linear", "--grid", "-4:4:401",
    ],
    "mmse_gaussian.csv": ["mmse", "--prior", PRIORS / "gaussian.toml", "--grid", "-2:2:20"],
    "mmse_two_point.csv": ["mmse", "--prior", PRIORS / "two_point.toml", "--grid", "-2:2:20"],
    "identity_checks.csv": ["check", "--all"],
}


def run(outdir: Path) -> int:
    outdir.mkdir(parents=True, exist_ok=True)
    status = 0
    for name, argv in RUNS.items():
        t0 = time.perf_counter()
        code = main([str(a) for a in argv] + ["--out", str(outdir / name)])
        print(f"{name:34s} exit={code} {time.perf_counter() - t0:6.2f} s")
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(run(Path(sys.argv[1] if len(sys.argv) > 1 else "figures")))
