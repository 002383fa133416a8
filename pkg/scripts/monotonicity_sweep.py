"""Sweep the split radius of a shell and locate where the two mixed eigenvalues meet.

For r in (R1, R2) the inner shell A_{R1,r} carries the inner condition and a
Neumann outer face, the outer shell A_{r,R2} a Neumann inner face and the
outer condition. Writes a CSV of both curves and prints the glue radius.
"""
from __future__ import annotations

import argparse
import csv
from dataclasses import dataclass

import numpy as np

from shellcut.radial import BoundaryCondition, eigenvalue, glue_radius, lambda_nr, lambda_rn


@dataclass
class SweepConfig:
    n: int = 3
    r1: float = 1.0
    r2: float = 2.0
    beta_inner: float = 1.0
    beta_outer: float = 1.0
    points: int = 20
    out: str = "monotonicity_sweep.csv"


def run(cfg: SweepConfig) -> dict:
    bi = BoundaryCondition.robin(cfg.beta_inner)
    bo = BoundaryCondition.robin(cfg.beta_outer)
    grid = np.linspace(cfg.r1, cfg.r2, cfg.points + 2)[1:-1]
    rn = np.array([lambda_rn(cfg.n, cfg.r1, r, bi) for r in grid])
    nr = np.array([lambda_nr(cfg.n, r, cfg.r2, bo) for r in grid])
    with open(cfg.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "lambda_rn", "lambda_nr"])
        w.writerows(zip(grid.tolist(), rn.tolist(), nr.tolist()))
    r_star, lam = glue_radius(cfg.r1, cfg.r2, bi, bo, cfg.n)
    lam_rr = eigenvalue(cfg.n, cfg.r1, cfg.r2, bi, bo)
    res = {"rn_nonincreasing": bool(np.all(np.diff(rn) <= 1e-9)),
           "nr_nondecreasing": bool(np.all(np.diff(nr) >= -1e-9)),
           "r_star": r_star, "lambda_common": lam, "lambda_rr": lam_rr}
    print(f"wrote {cfg.out} ({cfg.points} rows)")
    for k, v in res.items():
        print(f"{k:>18}: {v}")
    return res


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for name, val in vars(SweepConfig()).items():
        ap.add_argument(f"--{name.replace('_', '-')}", type=type(val), default=val)
    run(SweepConfig(**vars(ap.parse_args())))


if __name__ == "__main__":
    main()
