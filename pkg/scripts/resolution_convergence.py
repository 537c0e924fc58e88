"""Grid eigenvalues and capacities against exact values over a range of resolutions.

    python scripts/resolution_convergence.py --resolutions 16 32 64 128

Prints the relative error and the observed order between successive
resolutions for the disk, two rectangles and a concentric condenser.
"""
from __future__ import annotations

import argparse
import math
import time
from dataclasses import dataclass

from pfk.capacity import CondenserProblem, concentric_capacity, condenser_capacity
from pfk.discretize import rasterize
from pfk.geometry import Ball, Rectangle
from pfk.spectral import eigen_grid, eigen_radial_shoot


@dataclass
class ConvergenceConfig:
    resolutions: tuple = (16, 32, 64, 128)
    exponents: tuple = (1.5, 2.0, 3.0)


def cases(p):
    disk = eigen_radial_shoot(2, p).lam
    yield "disk", lambda res: eigen_grid(rasterize(Ball(2, 1.0), res), p).lam, disk
    if p == 2.0:
        for a, b in ((1.0, 1.0), (2.0, 1.0)):
            exact = math.pi**2 * (1 / a**2 + 1 / b**2)
            yield f"rectangle {a:g}x{b:g}", lambda res, a=a, b=b: eigen_grid(rasterize(Rectangle(a, b), res), p).lam, exact
    cap = concentric_capacity(2, p, 0.5, 1.0)
    yield "condenser B_0.5 in B_1", lambda res: condenser_capacity(
        CondenserProblem(Ball(2, 0.5), Ball(2, 1.0), p, res)), cap


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--resolutions", type=int, nargs="+", default=list(ConvergenceConfig.resolutions))
    ap.add_argument("--p", type=float, nargs="+", default=list(ConvergenceConfig.exponents))
    args = ap.parse_args(argv)
    cfg = ConvergenceConfig(tuple(args.resolutions), tuple(args.p))
    print(f"{'quantity':<26} {'p':>5} {'res':>5} {'value':>14} {'rel err':>10} {'order':>6} {'sec':>6}")
    for p in cfg.exponents:
        for label, compute, exact in cases(p):
            prev = None
            for res in cfg.resolutions:
                t0 = time.perf_counter()
                value = compute(res)
                err = abs(value - exact) / exact
                order = "" if prev is None or err == 0 else f"{math.log2(prev / err):6.2f}"
                print(f"{label:<26} {p:>5g} {res:>5} {value:>14.8g} {err:>10.2e} {order:>6} "
                      f"{time.perf_counter() - t0:>6.1f}")
                prev = err
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
