"""Structured test inputs and the reference corpus of worked instances.

Generators cover the families that are awkward to type by hand: chained
2x2 principal minors, trace forms built from a constant matrix, quadratic
forms over the stacked vector ``(x, y)`` and the determinant of ``X``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .conegen import build_matrix_variable
from .poly import PolyMatrix, Polynomial, VarSpace, parse_polynomial

HORN = np.array(
    [
        [1, -1, 1, 1, -1],
        [-1, 1, -1, 1, 1],
        [1, -1, 1, -1, 1],
        [1, 1, -1, 1, -1],
        [-1, 1, 1, -1, 1],
    ],
    dtype=float,
)

HOFFMAN_PEREIRA = np.array(
    [
        [1, -1, 1, 0, 0, 1, -1],
        [-1, 1, -1, 1, 0, 0, 1],
        [1, -1, 1, -1, 1, 0, 0],
        [0, 1, -1, 1, -1, 1, 0],
        [0, 0, 1, -1, 1, -1, 1],
        [1, 0, 0, 1, -1, 1, -1],
        [-1, 1, 0, 0, 1, -1, 1],
    ],
    dtype=float,
)

TRACE_SQUARE_A = np.array(
    [
        [1, -0.72, -0.59, 1],
        [-0.72, 1, -0.6, -0.46],
        [-0.59, -0.6, 1, -0.6],
        [1, -0.46, -0.6, 1],
    ]
)


def hoffman_pereira_perturbed(alpha: float) -> np.ndarray:
    """Hoffman-Pereira matrix with the last four diagonal entries set to ``(1+alpha)^2``."""
    A = HOFFMAN_PEREIRA.copy()
    for i in range(3, 7):
        A[i, i] = (1.0 + alpha) ** 2
    return A


def _constant_matrix(A: np.ndarray, space: VarSpace) -> PolyMatrix:
    return PolyMatrix.from_rows([[Polynomial.constant(space, float(a)) for a in row] for row in A])


def chain_minors(n: int) -> Polynomial:
    """``sum_i x_ii x_{i+1,i+1} - x_{i,i+1}^2`` on ``S^n``."""
    space = VarSpace(n, 0)
    f = Polynomial.zero(space)
    for i in range(1, n):
        f = f + Polynomial.x(space, i, i) * Polynomial.x(space, i + 1, i + 1) - Polynomial.x(space, i, i + 1) ** 2
    return f


def trace_square_form(A: np.ndarray) -> Polynomial:
    """``tr((X A)^2)``."""
    A = np.asarray(A, dtype=float)
    space = VarSpace(A.shape[0], 0)
    XA = build_matrix_variable(space) @ _constant_matrix(A, space)
    return (XA @ XA).trace()


def horn_trace_form(A: np.ndarray) -> Polynomial:
    """``tr(X^2 A + X A X)``."""
    A = np.asarray(A, dtype=float)
    space = VarSpace(A.shape[0], 0)
    X = build_matrix_variable(space)
    Ac = _constant_matrix(A, space)
    return ((X @ X) @ Ac).trace() + ((X @ Ac) @ X).trace()


def quadratic_form(A: np.ndarray, n: int, m: int) -> Polynomial:
    """``(x, y)' A (x, y)`` with ``x`` the upper-triangular entries of ``X`` in variable order."""
    space = VarSpace(n, m)
    A = np.asarray(A, dtype=float)
    if A.shape != (space.nvars, space.nvars):
        raise ValueError(f"matrix is {A.shape}, expected {space.nvars}x{space.nvars} for n={n}, m={m}")
    terms: dict[tuple[int, ...], float] = {}
    for i, j in itertools.product(range(space.nvars), repeat=2):
        if A[i, j] == 0:
            continue
        e = [0] * space.nvars
        e[i] += 1
        e[j] += 1
        terms[tuple(e)] = terms.get(tuple(e), 0.0) + float(A[i, j])
    return Polynomial(space, terms)


def determinant(n: int) -> Polynomial:
    """``det X`` by the Leibniz expansion (fine for the small ``n`` used here)."""
    space = VarSpace(n, 0)
    X = build_matrix_variable(space)
    out = Polynomial.zero(space)
    for perm in itertools.permutations(range(n)):
        inversions = sum(perm[a] > perm[b] for a in range(n) for b in range(a + 1, n))
        term = Polynomial.constant(space, -1.0 if inversions % 2 else 1.0)
        for i, j in enumerate(perm):
            term = term * X[i, j]
        out = out + term
    return out


@dataclass(frozen=True)
class CorpusCase:
    """One reference instance with its expected outcome.

    ``expected_bounds`` maps an order to ``(value, tol)``; ``verdict`` is the
    expected classification reached at ``verdict_order``.
    """

    name: str
    n: int
    m: int
    build: Callable[[], Polynomial] = field(compare=False, repr=False)
    verdict: str
    verdict_order: int
    expected_bounds: dict = field(default_factory=dict)
    suites: tuple[str, ...] = ()
    slow: bool = False
    allow_inhomogeneous: bool = False
    note: str = ""

    @property
    def space(self) -> VarSpace:
        return VarSpace(self.n, self.m)

    def polynomial(self) -> Polynomial:
        return self.build()


def _text(text: str, n: int, m: int = 0) -> Callable[[], Polynomial]:
    return lambda: parse_polynomial(text, VarSpace(n, m))


F1 = "x11^2*x12 + x11*x12^2 + x22^3 - 3*x11*x12*x22"
F2 = (
    "x11^3 + x12^3 + x22^3 - x11^2*x12 - x11*x12^2 - x11^2*x22 - x11*x22^2"
    " - x12^2*x22 - x12*x22^2 + 3*x11*x12*x22"
)
F3 = "x11^2*x12 + x12^2*x22 + x22^2*x11 - 3*x11*x12*x22"
F4 = "x11*x22 - x12^2 + x22*x33 - x23^2"
F5 = "x22 + x33 + 10*x11*x22 - 10*x12^2"

CERT_TOL = 1e-5

TABLE4 = [
    (0.01, -0.0229, "NotCopositive"),
    (0.02, -0.0152, "NotCopositive"),
    (0.03, -0.0075, "NotCopositive"),
    (0.04, 1.2918e-4, "Copositive"),
    (0.05, 0.0078, "Copositive"),
    (0.06, 0.0154, "Copositive"),
    (0.07, 0.0229, "Copositive"),
    (0.08, 0.0304, "Copositive"),
    (0.09, 0.0379, "Copositive"),
    (0.10, 0.0453, "Copositive"),
]


def _cases() -> list[CorpusCase]:
    cases = [
        CorpusCase("f1", 2, 0, _text(F1, 2), "NotCopositive", 2, {2: (-0.1213, 1e-3)}, ("table1",)),
        CorpusCase("f2", 2, 0, _text(F2, 2), "NotCopositive", 2, {2: (-0.5000, 1e-3)}, ("table1",)),
        CorpusCase("f3", 2, 0, _text(F3, 2), "NotCopositive", 2, {2: (-0.1629, 1e-3)}, ("table1",)),
        CorpusCase("f4", 3, 0, _text(F4, 3), "Copositive", 2, {2: (0.0, CERT_TOL)}, ("table2",)),
        CorpusCase(
            "f5", 3, 0, _text(F5, 3), "Copositive", 2, {2: (0.0, CERT_TOL)}, ("table2",),
            allow_inhomogeneous=True, note="mixes degrees 1 and 2",
        ),
        CorpusCase(
            "f6", 3, 0, lambda: determinant(3), "Copositive", 3,
            {2: (-0.0208, 2e-3), 3: (0.0, CERT_TOL)}, ("table2",),
        ),
    ]
    for n in (2, 3, 4):
        cases.append(
            CorpusCase(
                f"chain_n{n}", n, 0, lambda n=n: chain_minors(n), "Copositive", 2,
                {2: (0.0, CERT_TOL)}, ("table3",), slow=n == 4,
            )
        )
    for alpha, bound, verdict in TABLE4:
        cases.append(
            CorpusCase(
                f"hp_alpha_{alpha:.2f}", 2, 4,
                lambda a=alpha: quadratic_form(hoffman_pereira_perturbed(a), 2, 4),
                verdict, 2, {2: (bound, 2e-3)}, ("table4",),
            )
        )
    cases += [
        CorpusCase(
            "trace_square_n4", 4, 0, lambda: trace_square_form(TRACE_SQUARE_A), "Copositive", 3,
            {2: (-3.2167e-5, 1e-4), 3: (0.0, CERT_TOL)}, ("trace",), slow=True,
        ),
        CorpusCase(
            "horn_trace_n5", 5, 0, lambda: horn_trace_form(HORN), "NotCopositive", 2, {}, ("horn",), slow=True,
        ),
        CorpusCase(
            "mixed_horn", 2, 2, lambda: quadratic_form(HORN, 2, 2), "NotCopositive", 2, {}, ("mixed",),
            note="already refuted at k=2; k=3 refutes as well",
        ),
        CorpusCase(
            "mixed_hoffman_pereira", 3, 1, lambda: quadratic_form(HOFFMAN_PEREIRA, 3, 1),
            "NotCopositive", 2, {}, ("mixed",),
        ),
    ]
    return cases


CASES: list[CorpusCase] = _cases()
SUITES = ("table1", "table2", "table3", "table4", "horn", "mixed", "trace", "all")


def case(name: str) -> CorpusCase:
    for c in CASES:
        if c.name == name:
            return c
    raise KeyError(name)


def suite(name: str, include_slow: bool = False) -> list[CorpusCase]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    picked = [c for c in CASES if name == "all" or name in c.suites]
    return [c for c in picked if include_slow or not c.slow]
