"""Backend dispatch: the in-house interior-point code or an external SDPA binary."""

from __future__ import annotations

from .ipm import SolveResult, SolverOptions, solve_ipm
from .problem import ConicProblem


def solve(prob: ConicProblem, backend: str = "internal", options: SolverOptions | None = None) -> SolveResult:
    if backend in ("internal", "ipm"):
        return solve_ipm(prob, options)
    if backend.startswith("sdpa:"):
        from .sdpa import solve_external

        return solve_external(prob, backend[len("sdpa:"):], options)
    if backend == "cvxopt":
        from .cvx import solve_cvxopt

        return solve_cvxopt(prob, options)
    raise ValueError(f"unknown backend {backend!r}")
