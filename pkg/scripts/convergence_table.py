"""FEM convergence of the first eigenvalue on a concentric shell against shooting.

Prints one row per mesh size with the FEM eigenvalue, its error against the
radial value, the observed order and the Richardson extrapolant.
"""
from __future__ import annotations

import argparse
import math
from dataclasses import dataclass

from shellcut.fem import assemble, solve_first
from shellcut.geometry import concentric_shell
from shellcut.mesh import mesh_meridian
from shellcut.radial import BoundaryCondition, eigenvalue
from shellcut.verify import richardson


@dataclass
class ConvergenceConfig:
    n: int = 3
    r1: float = 1.0
    r2: float = 2.0
    beta_inner: float = 1.0
    beta_outer: float = 1.0
    h0: float = 0.1
    levels: int = 4


def run(cfg: ConvergenceConfig) -> list[dict]:
    bi = BoundaryCondition.robin(cfg.beta_inner)
    bo = BoundaryCondition.robin(cfg.beta_outer)
    exact = eigenvalue(cfg.n, cfg.r1, cfg.r2, bi, bo)
    dom = concentric_shell(cfg.n, cfg.r1, cfg.r2)
    rows, prev = [], None
    for k in range(cfg.levels):
        h = cfg.h0 / 2 ** k
        sol = solve_first(assemble(mesh_meridian(dom, h), cfg.n, bi, bo),
                          shift_hint=None if prev is None else prev["lam"])
        err = abs(sol.lam - exact)
        row = {"h": h, "nodes": sol.mesh.vertices.shape[0], "lam": sol.lam, "error": err,
               "order": math.nan, "richardson": math.nan}
        if prev is not None:
            row["order"] = math.log2(prev["error"] / err)
            row["richardson"] = richardson(prev["lam"], sol.lam)[0]
        rows.append(row)
        prev = row
    print(f"shooting lambda = {exact:.12f}")
    print(f"{'h':>9} {'nodes':>7} {'lambda_h':>16} {'error':>10} {'order':>6} {'richardson':>16}")
    for r in rows:
        print(f"{r['h']:9.5f} {r['nodes']:7d} {r['lam']:16.10f} {r['error']:10.2e} "
              f"{r['order']:6.2f} {r['richardson']:16.10f}")
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    d = ConvergenceConfig()
    for name, val in vars(d).items():
        ap.add_argument(f"--{name.replace('_', '-')}", type=type(val), default=val)
    run(ConvergenceConfig(**vars(ap.parse_args())))


if __name__ == "__main__":
    main()
