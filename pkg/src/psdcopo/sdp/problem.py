"""Standard-form conic programs over a moment vector.

A :class:`ConicProblem` reads::

    minimize    c @ z
    subject to  A @ z = b
                L_j(z) - C_j  is PSD   for every block j

where each ``L_j`` is a symmetric :class:`~psdcopo.moment.LinearMatrixMap`
and ``C_j`` a constant symmetric matrix (zero for assembled relaxations,
whose constant terms ride on the normalised moment ``z_0``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..conegen import ProblemSpec
from ..moment import (
    LinearMatrixMap,
    MomentError,
    MonomialBasis,
    block_localizing_map,
    coefficient_vector,
    localizing_map,
    moment_matrix_map,
)
from ..poly import Polynomial, iter_exponents


class OrderTooSmall(ValueError):
    pass


@dataclass
class ConicProblem:
    nz: int
    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    blocks: list[LinearMatrixMap]
    offsets: list[np.ndarray | None] = field(default_factory=list)
    basis: MonomialBasis | None = None
    order: int | None = None
    eq_labels: list[str] = field(default_factory=list)
    kind: str = "relaxation"

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.A = sp.csr_matrix(self.A)
        if not self.offsets:
            self.offsets = [None] * len(self.blocks)
        if self.c.shape != (self.nz,):
            raise ValueError("objective length does not match nz")
        if self.A.shape[1] != self.nz or self.A.shape[0] != self.b.shape[0]:
            raise ValueError("equality rows do not match nz / b")
        for L in self.blocks:
            if L.nz != self.nz:
                raise ValueError(f"block {L.label!r} references {L.nz} moments, expected {self.nz}")
            if not L.symmetric:
                raise ValueError(f"block {L.label!r} is not symmetric")

    @property
    def block_sizes(self) -> list[int]:
        return [L.rows for L in self.blocks]

    @property
    def block_labels(self) -> list[str]:
        return [L.label for L in self.blocks]

    @property
    def n_eq(self) -> int:
        return self.A.shape[0]

    def block_values(self, z: np.ndarray) -> list[np.ndarray]:
        out = []
        for L, C in zip(self.blocks, self.offsets):
            V = L(z)
            if C is not None:
                V = V - C
            out.append(V)
        return out

    def objective(self, z: np.ndarray) -> float:
        return float(self.c @ z)

    def feasibility(self, z: np.ndarray) -> dict[str, float]:
        """Equality residual and most negative block eigenvalue at ``z``."""
        z = np.asarray(z, dtype=float)
        eq = float(np.max(np.abs(self.A @ z - self.b))) if self.n_eq else 0.0
        eig = min((float(np.linalg.eigvalsh(V).min()) for V in self.block_values(z)), default=0.0)
        return {"equality": eq, "min_eig": eig}

    def census(self) -> dict:
        return {
            "nz": self.nz,
            "n_eq": self.n_eq,
            "blocks": dict(zip(self.block_labels, self.block_sizes)),
        }


def _dedup_rows(rows: list[sp.csr_matrix], labels: list[str]) -> tuple[sp.csr_matrix, list[str]]:
    seen: dict[tuple, int] = {}
    keep_rows = []
    keep_labels = []
    for R, lab in zip(rows, labels):
        R = sp.csr_matrix(R)
        R.sum_duplicates()
        R.eliminate_zeros()
        for i in range(R.shape[0]):
            lo, hi = R.indptr[i], R.indptr[i + 1]
            if lo == hi:
                continue
            idx = R.indices[lo:hi]
            val = R.data[lo:hi]
            order = np.argsort(idx)
            key = (tuple(idx[order]), tuple(val[order]))
            if key in seen:
                continue
            seen[key] = len(keep_rows)
            keep_rows.append(R[i])
            keep_labels.append(lab)
    if not keep_rows:
        return sp.csr_matrix((0, rows[0].shape[1] if rows else 0)), []
    return sp.vstack(keep_rows, format="csr"), keep_labels


def _equality_rows(q: Polynomial, k: int, big: MonomialBasis, mode: str) -> sp.csr_matrix:
    if mode == "localizing":
        return localizing_map(q, k).entry_rows()
    if mode == "ideal":
        # q * x^gamma for every |gamma| <= 2k - deg q
        space = q.space
        room = 2 * k - q.degree
        if room < 0:
            raise OrderTooSmall(f"order {k} too small for degree {q.degree}")
        gammas = list(iter_exponents(space.nvars, room))
        data, ri, ci = [], [], []
        for r, g in enumerate(gammas):
            for e, c in q.items():
                ri.append(r)
                ci.append(big.index[tuple(a + b for a, b in zip(e, g))])
                data.append(c)
        return sp.csr_matrix((data, (ri, ci)), shape=(len(gammas), len(big)))
    raise ValueError(f"unknown equality mode {mode!r}")


def _normalization_row(nz: int) -> sp.csr_matrix:
    return sp.csr_matrix(([1.0], ([0], [0])), shape=(1, nz))


def assemble_relaxation(spec: ProblemSpec, k: int, *, equality_mode: str = "ideal") -> ConicProblem:
    """The order-``k`` moment relaxation of the strengthened reformulation."""
    if k < spec.d0:
        raise OrderTooSmall(f"order {k} is below the minimal order d0={spec.d0}")
    space = spec.space
    big = MonomialBasis.of(space, 2 * k)
    nz = len(big)
    c = coefficient_vector(spec.objective, big)

    rows = [_normalization_row(nz)]
    labels = ["normalization"]
    eq_names = ["h"] + [f"XTheta[{i},{j}]" for i in range(space.n) for j in range(space.n)]
    eq_names += [f"p{t + 1}*y{t + 1}" for t in range(space.m)]
    for q, name in zip(spec.equalities, eq_names):
        if q.is_zero:
            continue
        rows.append(_equality_rows(q, k, big, equality_mode))
        labels.append(name)
    A, eq_labels = _dedup_rows(rows, labels)
    b = np.zeros(A.shape[0])
    b[0] = 1.0

    blocks = [moment_matrix_map(space, k)]
    for G, name in zip(spec.psd_matrices, ["L_X", "L_Theta"]):
        blocks.append(_block_for(G, k, name))
    scalar_names = ["L_1-normsq", "L_normsq-lb"]
    scalar_names += [f"L_y{t + 1}" for t in range(space.m)] + [f"L_p{t + 1}" for t in range(space.m)]
    for q, name in zip(spec.scalar_nonneg, scalar_names):
        if q.is_zero:
            continue
        blocks.append(localizing_map(q, k, label=name))
    blocks = [B for B in blocks if B.coeffs.nnz]
    return ConicProblem(nz, c, A, b, blocks, basis=big, order=k, eq_labels=eq_labels, kind="relaxation")


def _block_for(G, k, name):
    try:
        return block_localizing_map(G, k, label=name)
    except MomentError as exc:
        raise OrderTooSmall(str(exc)) from exc


def generic_objective(xi: np.ndarray, spec: ProblemSpec) -> Polynomial:
    """``xi^T [x]_d`` as a polynomial."""
    space = spec.space
    exps = list(iter_exponents(space.nvars, spec.degree))
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (len(exps),):
        raise ValueError(f"xi has length {xi.shape}, expected {len(exps)}")
    return Polynomial(space, dict(zip(exps, xi)))


def assemble_auxiliary(
    spec: ProblemSpec, xi: np.ndarray, bound: float | None, k: int, *, equality_mode: str = "ideal"
) -> ConicProblem:
    """Witness-extraction program: minimise a generic linear functional over
    moment vectors with ``f <= bound``.  Multiplier constraints are absent.

    ``bound=None`` drops the ``bound - f`` block.
    """
    if k < spec.d0:
        raise OrderTooSmall(f"order {k} is below the minimal order d0={spec.d0}")
    space = spec.space
    big = MonomialBasis.of(space, 2 * k)
    nz = len(big)
    c = coefficient_vector(generic_objective(xi, spec), big)

    A, eq_labels = _dedup_rows(
        [_normalization_row(nz), _equality_rows(spec.h, k, big, equality_mode)], ["normalization", "h"]
    )
    b = np.zeros(A.shape[0])
    b[0] = 1.0

    blocks = [moment_matrix_map(space, k), _block_for(spec.matrix_variable, k, "L_X")]
    if bound is not None:
        blocks.append(localizing_map(float(bound) - spec.objective, k, label="L_bound-f"))
    for t, yt in enumerate(spec.orthant_vars):
        blocks.append(localizing_map(yt, k, label=f"L_y{t + 1}"))
    upper, lower = spec.sandwich
    blocks.append(localizing_map(upper, k, label="L_1-normsq"))
    blocks.append(localizing_map(lower, k, label="L_normsq-lb"))
    return ConicProblem(nz, c, A, b, blocks, basis=big, order=k, eq_labels=eq_labels, kind="auxiliary")
