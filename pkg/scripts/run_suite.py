#!/usr/bin/env python3
"""Solve the 36-point parameter suite and tabulate constants, iterations and the energy bound."""

import argparse
import csv
import itertools
import time

import numpy as np

from oldroyd.certificates import energy_certificate, sobolev_constant
from oldroyd.discretization import FunctionSpaces, h_minus1_norm
from oldroyd.mesh import unit_square_mesh
from oldroyd.model import FluidParams, compute_constants
from oldroyd.solver import SolverOptions, solve_picard

SWIRL = lambda x, y: (-(y - 0.5) + 0 * x, (x - 0.5) + 0 * y)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=8)
    ap.add_argument("--f-norm", type=float, default=0.1)
    ap.add_argument("--scheme", default="coupled", choices=["coupled", "decoupled"])
    ap.add_argument("--csv", help="write the table here")
    args = ap.parse_args()

    sp = FunctionSpaces(unit_square_mesh(args.n))
    c_omega = sobolev_constant(sp).value
    k = args.f_norm / h_minus1_norm(SWIRL, sp)
    f = lambda x, y: tuple(k * np.asarray(v) for v in SWIRL(x, y))
    f_norm = h_minus1_norm(f, sp)
    print(f"n={args.n}  C_Omega,h={c_omega:.6f}  ||f||_H-1,h={f_norm:.6f}")

    header = ["re", "we", "a", "diff", "c1", "c2", "its", "secs", "norm_x", "bound_ok", "uniq_ok"]
    rows = []
    for re, we, a, diff in itertools.product((0.0, 1.0), (0.0, 0.01, 0.05), (-1.0, 0.0, 1.0), (0.01, 1.0)):
        p = FluidParams(re=re, we=we, a=a, diff=diff)
        consts = compute_constants(p, c_omega, f_norm)
        t = time.perf_counter()
        state, rep = solve_picard(p, f, sp, SolverOptions(scheme=args.scheme, max_iter=500),
                                  c1=consts.c1, c2=consts.c2)
        secs = time.perf_counter() - t
        if consts.existence_ok:
            cert = energy_certificate(sp, state, p, f, c_omega, f_norm)
            row = [re, we, a, diff, consts.c1, consts.c2, rep.iterations, secs, cert.norm_x, cert.bound_ok,
                   cert.uniqueness_ok]
        else:
            row = [re, we, a, diff, consts.c1, None, rep.iterations, secs, rep.final_norms[2], None, None]
        rows.append(row)
        print("  ".join(f"{v:.4g}" if isinstance(v, float) else str(v) for v in row))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)


if __name__ == "__main__":
    main()
