"""The outer decision procedure for copositivity over ``S^n_+ x R^m_+``.

At each order ``k`` the moment relaxation gives a lower bound on ``f`` over
the normalised cone section.  A nonnegative bound certifies copositivity.
Otherwise an auxiliary program, which minimises a generic linear functional
subject to ``f <= bound``, produces a candidate whose first-order moments
are checked directly.  ``m = 0`` is the pure matrix case.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .conegen import ProblemSpec, build_problem_spec
from .moment import moment_submatrix
from .poly import Polynomial, VarSpace, monomial_count
from .sdp import (
    ConicProblem,
    SolveResult,
    SolverOptions,
    Status,
    assemble_auxiliary,
    assemble_relaxation,
    solve,
)

EIG_TOL = 1e-6
SIMPLEX_TOL = 1e-6
ORTHANT_TOL = 1e-8


@dataclass(frozen=True)
class TestOptions:
    k_start: int | None = None
    k_max: int | None = None
    tol_nonneg: float = 1e-5
    rank_tol: float = 1e-6
    seed: int | None = 0
    backend: str = "internal"
    allow_inhomogeneous: bool = False
    bound_slack: float = 1e-7
    aux_feas_tol: float = 1e-6
    solver: SolverOptions = field(default_factory=SolverOptions)

    __test__ = False  # keep pytest from collecting this class

    def resolved(self, d0: int) -> "TestOptions":
        k_start = d0 if self.k_start is None else self.k_start
        k_max = d0 + 4 if self.k_max is None else self.k_max
        if k_start < d0:
            raise ValueError(f"k_start={k_start} is below the minimal order {d0}")
        if self.tol_nonneg <= 0:
            raise ValueError("tol_nonneg must be positive")
        return replace(self, k_start=k_start, k_max=k_max)


@dataclass
class OrderRecord:
    """What happened at one relaxation order."""

    order: int
    bound: float | None = None
    relaxation: dict = field(default_factory=dict)
    flat_t: int | None = None
    flat_rank: int | None = None
    auxiliary: dict | None = None
    candidate_value: float | None = None
    timings: dict = field(default_factory=dict)


@dataclass
class Verdict:
    orders: list[OrderRecord] = field(default_factory=list, kw_only=True)
    seed: int | None = field(default=None, kw_only=True)

    kind = "Verdict"
    exit_code = 2

    @property
    def decisive(self) -> bool:
        return self.kind in ("Copositive", "NotCopositive")

    def to_dict(self, timings: bool = True) -> dict:
        doc = {"verdict": self.kind}
        doc.update({k: v for k, v in asdict(self).items() if k not in ("orders",)})
        rows = []
        for rec in self.orders:
            row = asdict(rec)
            if not timings:
                row.pop("timings")
                for key in ("relaxation", "auxiliary"):
                    if row.get(key):
                        row[key] = {k: v for k, v in row[key].items() if k != "time_s"}
            rows.append(row)
        doc["orders"] = rows
        if timings:
            doc["timings"] = {f"k={r.order}": r.timings for r in self.orders}
        return _plain(doc)

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), indent=2)


@dataclass
class Copositive(Verdict):
    order: int
    bound: float
    flat_truncated: bool = False

    kind = "Copositive"
    exit_code = 0

    def summary(self) -> str:
        flat = ", flat truncation" if self.flat_truncated else ""
        return f"Copositive at k={self.order} (bound {self.bound:.4e}{flat})"


@dataclass
class NotCopositive(Verdict):
    witness_u: list[float]
    witness_v: list[float]
    value: float
    order: int
    source: str = "auxiliary"
    bound: float | None = None

    kind = "NotCopositive"
    exit_code = 1

    def summary(self) -> str:
        u = ", ".join(f"{a:.4f}" for a in self.witness_u)
        text = f"NotCopositive at k={self.order}: u=({u})"
        if self.witness_v:
            text += ", v=(" + ", ".join(f"{a:.4f}" for a in self.witness_v) + ")"
        return text + f", f={self.value:.4e}"


@dataclass
class Inconclusive(Verdict):
    k_max: int
    best_bound: float

    kind = "Inconclusive"
    exit_code = 2

    def summary(self) -> str:
        return f"Inconclusive up to k={self.k_max} (best bound {self.best_bound:.4e})"


@dataclass
class SolverFailure(Verdict):
    """A solve neither converged nor certified infeasibility, even after a retry."""

    order: int
    step: str
    status: str
    message: str = ""
    residuals: dict = field(default_factory=dict)

    kind = "SolverFailure"
    exit_code = 4

    def summary(self) -> str:
        return f"Solver failure at k={self.order} ({self.step}): {self.status} {self.message}".rstrip()


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


# --- building blocks ------------------------------------------------------------


def sample_generic_direction(space: VarSpace, d: int, seed=None) -> np.ndarray:
    """I.i.d. standard normal coefficients for every monomial of degree ``<= d``."""
    if d < 1:
        raise ValueError("degree must be >= 1")
    rng = np.random.default_rng(seed)
    return rng.standard_normal(monomial_count(space.nvars, d))


def numerical_rank(M: np.ndarray, rank_tol: float) -> int:
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] <= 0:
        return 0
    return int(np.sum(sv > rank_tol * sv[0]))


def flat_truncation(z: np.ndarray, k: int, dK: int, rank_tol: float = 1e-6, *, space: VarSpace):
    """Smallest ``t`` in ``[dK, k]`` with ``rank M_{t-dK} = rank M_t``, else ``None``."""
    if dK > k:
        raise ValueError(f"dK={dK} exceeds k={k}")
    z = np.asarray(z, dtype=float)
    ranks = {}

    def rank(t):
        if t not in ranks:
            ranks[t] = numerical_rank(moment_submatrix(z, space, t), rank_tol)
        return ranks[t]

    for t in range(dK, k + 1):
        if rank(t - dK) == rank(t):
            return t
    return None


def extract_witness(w: np.ndarray, space: VarSpace, tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """First-order moments of ``w``: the matrix part ``u`` and the orthant part ``v``."""
    w = np.asarray(w, dtype=float)
    if abs(w[0] - 1.0) > tol:
        raise ValueError(f"moment vector is not normalised (w_0 = {w[0]:.3g})")
    first = w[1 : 1 + space.nvars]
    return first[: space.sigma].copy(), first[space.sigma :].copy()


def witness_violations(u, v, space: VarSpace) -> dict:
    """How far ``(u, v)`` is from the normalised cone section."""
    X = space.matrix_of(np.concatenate([u, v]))
    return {
        "min_eig": float(np.linalg.eigvalsh(X).min()),
        "simplex": float(abs(np.trace(X) + np.sum(v) - 1.0)),
        "min_v": float(np.min(v)) if len(v) else 0.0,
    }


def is_valid_witness(u, v, space: VarSpace) -> bool:
    viol = witness_violations(u, v, space)
    return viol["min_eig"] >= -EIG_TOL and viol["simplex"] <= SIMPLEX_TOL and viol["min_v"] >= -ORTHANT_TOL


def polish_witness(u, v, space: VarSpace) -> tuple[np.ndarray, np.ndarray]:
    """Project onto the cone and rescale onto ``tr X + sum v = 1``."""
    X = space.matrix_of(np.concatenate([u, v]))
    lam, Q = np.linalg.eigh(X)
    X = (Q * np.clip(lam, 0.0, None)) @ Q.T
    v = np.clip(np.asarray(v, dtype=float), 0.0, None)
    total = np.trace(X) + v.sum()
    if total <= 0:
        return np.asarray(u, dtype=float), v
    point = space.point_of(X / total, v / total)
    return point[: space.sigma], point[space.sigma :]


def spec_dk(spec: ProblemSpec) -> int:
    degs = [spec.objective.degree] + [q.degree for q in spec.equalities]
    degs += [G.degree for G in spec.psd_matrices] + [q.degree for q in spec.scalar_nonneg]
    return max(math.ceil(max(d, 0) / 2) for d in degs)


def _solve_checked(prob: ConicProblem, opts: TestOptions) -> SolveResult:
    """Solve once; on IterationLimit/IllPosed retry once with tightened settings."""
    res = solve(prob, opts.backend, opts.solver)
    if res.status in (Status.ILL_POSED, Status.ITERATION_LIMIT):
        tight = replace(
            opts.solver,
            eps_feas=opts.solver.eps_feas / 10,
            eps_gap=opts.solver.eps_gap / 10,
            max_iter=2 * opts.solver.max_iter,
            step=0.95,
        )
        retry = solve(prob, opts.backend, tight)
        # a tightened run that stalls may still satisfy the original targets
        if retry.status in (Status.ILL_POSED, Status.ITERATION_LIMIT) and _meets(retry, opts.solver):
            retry.status = Status.OPTIMAL
        res = retry
    return res


def _meets(res: SolveResult, sopts: SolverOptions) -> bool:
    r = res.residuals
    if res.z is None or not r:
        return False
    return (
        r.get("primal", math.inf) <= sopts.eps_feas
        and r.get("dual", math.inf) <= sopts.eps_feas
        and r.get("gap", math.inf) <= sopts.eps_gap
        and r.get("complementarity", math.inf) <= sopts.eps_comp
    )


def _primal_usable(res: SolveResult, opts: TestOptions) -> bool:
    return res.z is not None and res.residuals.get("primal", math.inf) <= opts.aux_feas_tol


def _stats(res: SolveResult, prob: ConicProblem) -> dict:
    return {**res.stats(), "nz": prob.nz, "n_eq": prob.n_eq, "blocks": prob.block_sizes}


def _candidate(f: Polynomial, u, v, space: VarSpace):
    """Check a raw first-moment candidate, polishing it if slightly off the cone."""
    if not is_valid_witness(u, v, space):
        u, v = polish_witness(u, v, space)
        if not is_valid_witness(u, v, space):
            return None
    value = f.evaluate(np.concatenate([u, v]))
    return u, v, value


def test_copositivity(f: Polynomial, space: VarSpace | None = None, opts: TestOptions | None = None) -> Verdict:
    """Decide copositivity of ``f`` over ``S^n_+ x R^m_+`` by climbing the hierarchy."""
    opts = opts or TestOptions()
    space = space or f.space
    spec = build_problem_spec(f, space, allow_inhomogeneous=opts.allow_inhomogeneous)
    opts = opts.resolved(spec.d0)
    dK = spec_dk(spec)
    xi = sample_generic_direction(space, spec.degree, opts.seed)
    records: list[OrderRecord] = []
    best_bound = -math.inf

    def done(verdict: Verdict) -> Verdict:
        verdict.orders = records
        verdict.seed = opts.seed
        return verdict

    for k in range(opts.k_start, opts.k_max + 1):
        rec = OrderRecord(order=k)
        records.append(rec)

        t0 = time.perf_counter()
        prob = assemble_relaxation(spec, k)
        res = _solve_checked(prob, opts)
        rec.timings["relaxation"] = time.perf_counter() - t0
        rec.relaxation = _stats(res, prob)
        if res.status != Status.OPTIMAL:
            return done(SolverFailure(k, "relaxation", res.status.value, res.message, res.residuals))

        bound = min(res.objective_value, res.dual_value)
        rec.bound = bound
        best_bound = max(best_bound, bound)

        t0 = time.perf_counter()
        if k >= dK:
            rec.flat_t = flat_truncation(res.z, k, dK, opts.rank_tol, space=space)
            if rec.flat_t is not None:
                rec.flat_rank = numerical_rank(moment_submatrix(res.z, space, rec.flat_t), opts.rank_tol)
        rec.timings["flat_truncation"] = time.perf_counter() - t0

        if bound >= -opts.tol_nonneg:
            return done(Copositive(k, bound, rec.flat_t is not None))

        if rec.flat_rank == 1:
            # a single atom: its first moments are a minimiser
            cand = _candidate(f, *extract_witness(res.z, space), space)
            if cand is not None and cand[2] < 0:
                u, v, value = cand
                rec.candidate_value = value
                return done(NotCopositive(u.tolist(), v.tolist(), value, k, "flat_truncation", bound))

        t0 = time.perf_counter()
        aux = assemble_auxiliary(spec, xi, bound + opts.bound_slack, k)
        ares = _solve_checked(aux, opts)
        rec.timings["auxiliary"] = time.perf_counter() - t0
        rec.auxiliary = _stats(ares, aux)
        if ares.status == Status.PRIMAL_INFEASIBLE:
            continue
        if ares.status != Status.OPTIMAL:
            # The candidate is verified independently and a miss only raises
            # k, so a stalled solve is still usable once its iterate is
            # primal feasible.
            if not _primal_usable(ares, opts):
                return done(SolverFailure(k, "auxiliary", ares.status.value, ares.message, ares.residuals))
            rec.auxiliary["accepted_unconverged"] = True

        cand = _candidate(f, *extract_witness(ares.z, space), space)
        if cand is not None:
            u, v, value = cand
            rec.candidate_value = value
            if value < 0:
                return done(NotCopositive(u.tolist(), v.tolist(), value, k, "auxiliary", bound))

    return done(Inconclusive(opts.k_max, best_bound))
