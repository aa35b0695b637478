"""Conic programs over moment vectors and the solvers that handle them."""

from .ipm import SolveResult, SolverOptions, Status, solve_ipm
from .problem import (
    ConicProblem,
    OrderTooSmall,
    assemble_auxiliary,
    assemble_relaxation,
    generic_objective,
)
from .backends import solve

__all__ = [
    "ConicProblem",
    "OrderTooSmall",
    "SolveResult",
    "SolverOptions",
    "Status",
    "assemble_auxiliary",
    "assemble_relaxation",
    "generic_objective",
    "solve",
    "solve_ipm",
]
