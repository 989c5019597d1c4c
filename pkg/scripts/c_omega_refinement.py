#!/usr/bin/env python3
"""Discrete Sobolev constant C_Omega,h on nested unit-square meshes."""

import argparse

from oldroyd.certificates import c_omega_under_refinement
from oldroyd.discretization import FunctionSpaces
from oldroyd.mesh import refine_uniform, unit_square_mesh

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--n0", type=int, default=4)
ap.add_argument("--levels", type=int, default=3)
ap.add_argument("--restarts", type=int, default=5)
args = ap.parse_args()

m = unit_square_mesh(args.n0)
spaces = [FunctionSpaces(m)]
for _ in range(args.levels - 1):
    m = refine_uniform(m)
    spaces.append(FunctionSpaces(m))
for sp, est in zip(spaces, c_omega_under_refinement(spaces, n_restarts=args.restarts)):
    print(f"triangles={sp.mesh.n_triangles:6d}  h={sp.mesh.h():.4f}  C={est.value:.12f}  "
          f"audit={est.audit_max_ratio:.4f}  ascent its={max(est.iterations)}")
