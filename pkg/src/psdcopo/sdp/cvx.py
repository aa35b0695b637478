"""Optional cross-check backend built on ``cvxopt.solvers.conelp``."""

from __future__ import annotations

import math
import time

import numpy as np
import scipy.sparse as sp

from .ipm import SolveResult, SolverOptions, Status, _independent_rows
from .problem import ConicProblem

_STATUS = {
    "optimal": Status.OPTIMAL,
    "primal infeasible": Status.PRIMAL_INFEASIBLE,
    "dual infeasible": Status.DUAL_INFEASIBLE,
}


def _spmatrix(M):
    from cvxopt import spmatrix

    C = sp.coo_matrix(M)
    return spmatrix(C.data.tolist(), C.row.tolist(), C.col.tolist(), size=C.shape)


def solve_cvxopt(prob: ConicProblem, options: SolverOptions | None = None) -> SolveResult:
    try:
        from cvxopt import matrix, solvers
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise RuntimeError("the cvxopt backend needs the optional 'cvxopt' package") from exc
    opts = options or SolverOptions()
    t0 = time.perf_counter()
    A, b, consistent = _independent_rows(prob.A, prob.b)
    if not consistent:
        return SolveResult(Status.PRIMAL_INFEASIBLE, None, math.nan, math.nan, {}, 0, 0.0)
    G = sp.vstack([-L.coeffs for L in prob.blocks], format="coo")
    h = np.concatenate(
        [np.zeros(L.rows**2) if C is None else -np.asarray(C, dtype=float).reshape(-1)
         for L, C in zip(prob.blocks, prob.offsets)]
    )
    dims = {"l": 0, "q": [], "s": [int(n) for n in prob.block_sizes]}
    sol = solvers.conelp(
        matrix(prob.c), _spmatrix(G), matrix(h), dims, _spmatrix(A), matrix(b),
        options={"show_progress": opts.verbose, "feastol": opts.eps_feas, "abstol": 1e-10,
                 "reltol": opts.eps_gap, "maxiters": opts.max_iter},
    )
    status = _STATUS.get(sol["status"], Status.ILL_POSED)
    z = np.array(sol["x"]).ravel() if sol["x"] is not None else None
    residuals = {
        "primal": sol.get("primal infeasibility") or math.nan,
        "dual": sol.get("dual infeasibility") or math.nan,
        "gap": sol.get("relative gap") or math.nan,
    }
    return SolveResult(
        status,
        z if status == Status.OPTIMAL else None,
        float(sol["primal objective"]) if sol["primal objective"] is not None else math.nan,
        float(sol["dual objective"]) if sol["dual objective"] is not None else math.nan,
        residuals,
        int(sol["iterations"]),
        time.perf_counter() - t0,
        message=f"cvxopt status {sol['status']}",
    )
