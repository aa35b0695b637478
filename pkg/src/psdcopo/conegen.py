"""First-order structure for copositivity over ``S^n_+`` and ``S^n_+ x R^m_+``.

Minimising a degree-``d`` form ``f`` over the normalised cone section
``tr X + sum(y) = 1`` admits Lagrange multipliers that can be written as
polynomials in the variables themselves:

* ``Theta[i, i] = df/dx_ii - d*f`` and ``Theta[i, j] = 0.5*df/dx_ij`` for
  ``i < j`` (the multiplier of ``X >= 0``), and
* ``p_t = df/dy_t - d*f`` (the multiplier of ``y_t >= 0``).

Adding ``X Theta = 0``, ``Theta >= 0``, ``p_t y_t = 0``, ``p_t >= 0`` and the
Frobenius-norm sandwich ``1/(n+m) <= ||X||_F^2 + ||y||^2 <= 1`` leaves the
minimum unchanged and makes the moment hierarchy converge finitely.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .poly import PolyMatrix, Polynomial, VarSpace, parse_polynomial


class NotHomogeneousError(ValueError):
    def __init__(self, p: Polynomial, degrees: tuple[int, ...]):
        self.degrees = degrees
        offending = {
            d: Polynomial(p.space, {e: c for e, c in p.items() if sum(e) == d}).to_text()
            for d in degrees
        }
        self.offending = offending
        detail = "; ".join(f"degree {d}: {t}" for d, t in offending.items())
        super().__init__(f"polynomial is not homogeneous ({detail})")


def build_matrix_variable(space: VarSpace) -> PolyMatrix:
    n = space.n
    rows = [[Polynomial.variable(space, space.x_index(i, j)) for j in range(n)] for i in range(n)]
    return PolyMatrix.from_rows(rows)


def structural_polynomials(space: VarSpace) -> tuple[Polynomial, Polynomial]:
    """Return ``(h, normsq)``.

    ``h = sum_i x_ii + sum_t y_t - 1`` and
    ``normsq = ||X||_F^2 + ||y||^2`` with off-diagonal squares counted twice.
    """
    h = Polynomial.constant(space, -1.0)
    normsq = Polynomial.zero(space)
    for i in range(space.n):
        for j in range(i, space.n):
            v = Polynomial.variable(space, space.x_index(i, j))
            normsq = normsq + (1.0 if i == j else 2.0) * v * v
            if i == j:
                h = h + v
    for t in range(space.m):
        v = Polynomial.variable(space, space.y_index(t))
        h = h + v
        normsq = normsq + v * v
    return h, normsq


def sandwich_polynomials(space: VarSpace) -> tuple[Polynomial, Polynomial]:
    """``(1 - normsq, normsq - 1/(n+m))``; both are >= 0 on the feasible set."""
    _, normsq = structural_polynomials(space)
    return 1.0 - normsq, normsq - 1.0 / (space.n + space.m)


def _check_degree(f: Polynomial, allow_inhomogeneous: bool) -> int:
    rep = f.homogeneous_degree()
    if rep.is_zero:
        raise ValueError("the zero polynomial has no copositivity test")
    if not rep.homogeneous and not allow_inhomogeneous:
        raise NotHomogeneousError(f, rep.degrees)
    d = rep.degree
    if d < 1:
        raise ValueError("constant objectives are not supported (degree must be >= 1)")
    return d


def build_theta(
    f: Polynomial, space: VarSpace | None = None, *, allow_inhomogeneous: bool = False
) -> tuple[PolyMatrix, list[Polynomial]]:
    """Multiplier matrix ``Theta`` and orthant multipliers ``p_t``.

    With ``allow_inhomogeneous`` the total degree of ``f`` plays the role
    of ``d``; the resulting constraints are then no longer implied by the
    optimality conditions.
    """
    space = space or f.space
    if f.space != space:
        raise ValueError("polynomial lives in a different space")
    d = _check_degree(f, allow_inhomogeneous)
    n = space.n
    df = f.scale(float(d))
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            g = f.differentiate(space.x_index(i, j))
            row.append(g - df if i == j else g.scale(0.5))
        rows.append(row)
    theta = PolyMatrix.from_rows(rows)
    p = [f.differentiate(space.y_index(t)) - df for t in range(space.m)]
    return theta, p


def complementarity_products(
    X: PolyMatrix, theta: PolyMatrix, p: list[Polynomial], space: VarSpace
) -> list[Polynomial]:
    """All ``n*n`` entries of ``X @ Theta`` (row-major), then ``p_t * y_t``."""
    if X.shape != theta.shape or X.rows != space.n:
        raise ValueError(f"shape mismatch: X {X.shape}, Theta {theta.shape}, n={space.n}")
    if len(p) != space.m:
        raise ValueError(f"expected {space.m} orthant multipliers, got {len(p)}")
    prod = X @ theta
    out = list(prod.entries)
    for t, pt in enumerate(p):
        out.append(pt * Polynomial.variable(space, space.y_index(t)))
    return out


@dataclass(frozen=True)
class ProblemSpec:
    """One instance of the strengthened reformulation.

    ``equalities`` must vanish, ``psd_matrices`` must be PSD and
    ``scalar_nonneg`` must be nonnegative.  The first equality is always
    ``h`` and the first PSD matrix is always ``X``.
    """

    space: VarSpace
    objective: Polynomial
    degree: int
    equalities: tuple[Polynomial, ...]
    psd_matrices: tuple[PolyMatrix, ...]
    scalar_nonneg: tuple[Polynomial, ...]
    d0: int
    labels: dict = field(default_factory=dict, compare=False)

    @property
    def h(self) -> Polynomial:
        return self.equalities[0]

    @property
    def matrix_variable(self) -> PolyMatrix:
        return self.psd_matrices[0]

    @property
    def theta(self) -> PolyMatrix:
        return self.psd_matrices[1]

    @property
    def sandwich(self) -> tuple[Polynomial, Polynomial]:
        return self.scalar_nonneg[0], self.scalar_nonneg[1]

    @property
    def orthant_vars(self) -> tuple[Polynomial, ...]:
        m = self.space.m
        return self.scalar_nonneg[2 : 2 + m]

    @property
    def orthant_multipliers(self) -> tuple[Polynomial, ...]:
        m = self.space.m
        return self.scalar_nonneg[2 + m : 2 + 2 * m]

    def constraint_residuals(self, point) -> dict[str, float]:
        """Worst violation of each constraint family at ``point``."""
        import numpy as np

        eq = max(abs(q.evaluate(point)) for q in self.equalities)
        psd = min(float(np.linalg.eigvalsh(G.evaluate(point)).min()) for G in self.psd_matrices)
        ineq = min(q.evaluate(point) for q in self.scalar_nonneg)
        return {"equality": eq, "psd_min_eig": psd, "scalar_min": ineq}

    def to_json(self) -> str:
        doc = {
            "n": self.space.n,
            "m": self.space.m,
            "degree": self.degree,
            "d0": self.d0,
            "objective": self.objective.to_text(),
            "equalities": [q.to_text() for q in self.equalities],
            "psd_matrices": [G.to_text_rows() for G in self.psd_matrices],
            "scalar_nonneg": [q.to_text() for q in self.scalar_nonneg],
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ProblemSpec":
        doc = json.loads(text)
        space = VarSpace(doc["n"], doc["m"])

        def P(s):
            return parse_polynomial(s, space)

        mats = tuple(PolyMatrix.from_rows([[P(s) for s in row] for row in rows]) for rows in doc["psd_matrices"])
        return cls(
            space=space,
            objective=P(doc["objective"]),
            degree=doc["degree"],
            equalities=tuple(P(s) for s in doc["equalities"]),
            psd_matrices=mats,
            scalar_nonneg=tuple(P(s) for s in doc["scalar_nonneg"]),
            d0=doc["d0"],
        )


def minimal_order(d: int) -> int:
    return math.ceil((d + 1) / 2)


def build_problem_spec(f: Polynomial, space: VarSpace | None = None, *, allow_inhomogeneous: bool = False) -> ProblemSpec:
    space = space or f.space
    theta, p = build_theta(f, space, allow_inhomogeneous=allow_inhomogeneous)
    d = f.degree
    X = build_matrix_variable(space)
    h, _ = structural_polynomials(space)
    upper, lower = sandwich_polynomials(space)
    eqs = [h] + complementarity_products(X, theta, p, space)
    ys = [Polynomial.variable(space, space.y_index(t)) for t in range(space.m)]
    return ProblemSpec(
        space=space,
        objective=f,
        degree=d,
        equalities=tuple(eqs),
        psd_matrices=(X, theta),
        scalar_nonneg=tuple([upper, lower] + ys + p),
        d0=minimal_order(d),
        labels={"inhomogeneous": not f.homogeneous_degree().homogeneous},
    )
