#!/usr/bin/env python3
"""Convergence study on the default manufactured solution."""

import argparse

from oldroyd.model import FluidParams
from oldroyd.verification import convergence_study, default_benchmark

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--levels", type=int, default=3)
ap.add_argument("--n0", type=int, default=8)
ap.add_argument("--re", type=float, default=1.0)
ap.add_argument("--we", type=float, default=0.05)
ap.add_argument("--a", type=float, default=1.0)
ap.add_argument("--diff", type=float, default=1.0)
ap.add_argument("--stress-scale", type=float, default=0.1)
ap.add_argument("--reference", choices=["interpolant", "exact"], default="interpolant")
ap.add_argument("--workers", type=int, default=1)
ap.add_argument("--csv")
args = ap.parse_args()

p = FluidParams(re=args.re, we=args.we, a=args.a, diff=args.diff)
tab = convergence_study(default_benchmark(1.0, args.stress_scale), p, args.levels, args.n0,
                        reference=args.reference, workers=args.workers)
print(f"{'n':>4} {'u H1':>11} {'p L2':>11} {'s H1':>11}   rates")
for k, (n, e) in enumerate(zip(tab.n, tab.errors)):
    rates = "" if k == 0 else "  ".join(f"{r:.2f}" for r in tab.rates[k - 1])
    print(f"{n:>4} {e[0]:11.3e} {e[1]:11.3e} {e[2]:11.3e}   {rates}")
if args.csv:
    tab.write_csv(args.csv)
