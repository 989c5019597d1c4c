"""Galerkin solver and well-posedness certificates for the stationary Oldroyd
model with diffusive stress on 2D polygonal domains."""

from .model import FluidParams, compute_c1, compute_c2, compute_constants, constants_abc, eval_g_a, uniqueness_AB
from .mesh import Mesh, unit_square_mesh, refine_uniform, boundary_vertices
from .discretization import FunctionSpaces, State
from .solver import SolverOptions, SolveReport, solve_picard

__all__ = [
    "FluidParams", "compute_c1", "compute_c2", "compute_constants", "constants_abc", "eval_g_a",
    "uniqueness_AB", "Mesh", "unit_square_mesh", "refine_uniform", "boundary_vertices",
    "FunctionSpaces", "State", "SolverOptions", "SolveReport", "solve_picard",
]
