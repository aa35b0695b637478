"""Sparse multivariate polynomials over the variables of a symmetric matrix.

The variable set is ``x11, x12, ..., x1n, x22, ..., xnn, y1, ..., ym``: the
upper triangle of an ``n x n`` symmetric matrix read row by row, followed by
``m`` orthant variables.  Polynomials are immutable maps from exponent tuples
to nonzero float coefficients.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

Exponent = tuple[int, ...]

#: Degree reported for the zero polynomial.
ZERO_DEGREE = -1


class PolynomialError(ValueError):
    pass


class ParseError(PolynomialError):
    """Raised for malformed polynomial text; ``pos`` is the 0-based offset."""

    def __init__(self, message: str, pos: int, text: str = ""):
        self.pos = pos
        self.text = text
        super().__init__(f"{message} at position {pos}")


class SpaceMismatch(PolynomialError):
    pass


@dataclass(frozen=True)
class VarSpace:
    """Variables of ``S^n x R^m``: ``sigma(n) + m`` coordinates in fixed order."""

    n: int
    m: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"matrix dimension must be >= 1, got {self.n}")
        if self.m < 0:
            raise ValueError(f"orthant dimension must be >= 0, got {self.m}")

    @property
    def sigma(self) -> int:
        return self.n * (self.n + 1) // 2

    @property
    def nvars(self) -> int:
        return self.sigma + self.m

    @cached_property
    def _pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple((i, j) for i in range(self.n) for j in range(i, self.n))

    @cached_property
    def _pair_index(self) -> dict[tuple[int, int], int]:
        return {p: k for k, p in enumerate(self._pairs)}

    def x_index(self, i: int, j: int) -> int:
        """Index of ``x_ij`` (0-based ``i, j``, either order)."""
        if i > j:
            i, j = j, i
        if not (0 <= i and j < self.n):
            raise IndexError(f"x[{i},{j}] out of range for n={self.n}")
        return self._pair_index[(i, j)]

    def y_index(self, t: int) -> int:
        if not 0 <= t < self.m:
            raise IndexError(f"y[{t}] out of range for m={self.m}")
        return self.sigma + t

    def pair(self, index: int) -> tuple[int, int]:
        """Inverse of :meth:`x_index` for matrix variables."""
        return self._pairs[index]

    def is_matrix_var(self, index: int) -> bool:
        return 0 <= index < self.sigma

    def diagonal_indices(self) -> list[int]:
        return [self.x_index(i, i) for i in range(self.n)]

    def var_name(self, index: int) -> str:
        if not 0 <= index < self.nvars:
            raise IndexError(f"variable index {index} out of range")
        if index < self.sigma:
            i, j = self._pairs[index]
            if self.n <= 9:
                return f"x{i + 1}{j + 1}"
            return f"x_{i + 1}_{j + 1}"
        return f"y{index - self.sigma + 1}"

    def var_names(self) -> list[str]:
        return [self.var_name(k) for k in range(self.nvars)]

    def matrix_of(self, point: Sequence[float]) -> np.ndarray:
        """Symmetric matrix ``X(u)`` for the first ``sigma(n)`` coordinates."""
        u = np.asarray(point, dtype=float)
        X = np.empty((self.n, self.n))
        for k, (i, j) in enumerate(self._pairs):
            X[i, j] = X[j, i] = u[k]
        return X

    def point_of(self, X: np.ndarray, y: Sequence[float] = ()) -> np.ndarray:
        """Coordinates of ``(X, y)``; inverse of :meth:`matrix_of`."""
        X = np.asarray(X, dtype=float)
        u = [X[i, j] for (i, j) in self._pairs]
        return np.array(u + list(y), dtype=float)


def _grlex_key(e: Exponent) -> tuple:
    # graded, then x1 > x2 > ... within a degree
    return (sum(e), tuple(-a for a in e))


def _format_coef(c: float) -> str:
    if c == int(c) and abs(c) < 1e15:
        return str(int(c))
    return repr(float(c))


class Polynomial:
    """Immutable sparse polynomial over a :class:`VarSpace`."""

    __slots__ = ("space", "_terms")

    def __init__(self, space: VarSpace, terms: Mapping[Exponent, float] | None = None):
        self.space = space
        clean: dict[Exponent, float] = {}
        nv = space.nvars
        for e, c in (terms or {}).items():
            e = tuple(int(a) for a in e)
            if len(e) != nv:
                raise PolynomialError(f"exponent {e} has length {len(e)}, expected {nv}")
            if any(a < 0 for a in e):
                raise PolynomialError(f"negative exponent in {e}")
            c = float(c)
            if c != 0.0:
                clean[e] = clean.get(e, 0.0) + c
        self._terms = {e: c for e, c in sorted(clean.items(), key=lambda kv: _grlex_key(kv[0])) if c != 0.0}

    # --- constructors -------------------------------------------------

    @classmethod
    def zero(cls, space: VarSpace) -> "Polynomial":
        return cls(space)

    @classmethod
    def constant(cls, space: VarSpace, value: float) -> "Polynomial":
        return cls(space, {(0,) * space.nvars: value})

    @classmethod
    def variable(cls, space: VarSpace, index: int, coef: float = 1.0) -> "Polynomial":
        if not 0 <= index < space.nvars:
            raise IndexError(f"variable index {index} out of range")
        e = [0] * space.nvars
        e[index] = 1
        return cls(space, {tuple(e): coef})

    @classmethod
    def x(cls, space: VarSpace, i: int, j: int) -> "Polynomial":
        """``x_ij`` with 1-based indices, as written in the text grammar."""
        return cls.variable(space, space.x_index(i - 1, j - 1))

    @classmethod
    def y(cls, space: VarSpace, t: int) -> "Polynomial":
        return cls.variable(space, space.y_index(t - 1))

    # --- basic properties ----------------------------------------------

    @property
    def terms(self) -> dict[Exponent, float]:
        return dict(self._terms)

    def items(self) -> Iterator[tuple[Exponent, float]]:
        return iter(self._terms.items())

    def __len__(self) -> int:
        return len(self._terms)

    @property
    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int:
        if not self._terms:
            return ZERO_DEGREE
        return max(sum(e) for e in self._terms)

    def coefficient(self, exponent: Exponent) -> float:
        return self._terms.get(tuple(exponent), 0.0)

    def constant_term(self) -> float:
        return self._terms.get((0,) * self.space.nvars, 0.0)

    # --- arithmetic ------------------------------------------------------

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.space != self.space:
                raise SpaceMismatch(f"{self.space} vs {other.space}")
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial.constant(self.space, float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for e, c in other._terms.items():
            out[e] = out.get(e, 0.0) + c
        return Polynomial(self.space, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.space, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.scale(float(other))
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict[Exponent, float] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0.0) + c1 * c2
        return Polynomial(self.space, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only nonnegative integer powers")
        out = Polynomial.constant(self.space, 1.0)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def scale(self, s: float) -> "Polynomial":
        return Polynomial(self.space, {e: s * c for e, c in self._terms.items()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.space == other.space and self._terms == other._terms

    def __hash__(self):
        return hash((self.space, tuple(self._terms.items())))

    def almost_equal(self, other: "Polynomial", tol: float = 1e-12) -> bool:
        diff = self - other
        return all(abs(c) <= tol for _, c in diff.items())

    # --- calculus and evaluation ------------------------------------------

    def differentiate(self, var_index: int) -> "Polynomial":
        if not 0 <= var_index < self.space.nvars:
            raise IndexError(f"variable index {var_index} out of range")
        out: dict[Exponent, float] = {}
        for e, c in self._terms.items():
            a = e[var_index]
            if a == 0:
                continue
            ne = list(e)
            ne[var_index] = a - 1
            out[tuple(ne)] = c * a
        return Polynomial(self.space, out)

    def gradient(self) -> list["Polynomial"]:
        return [self.differentiate(k) for k in range(self.space.nvars)]

    def evaluate(self, point: Sequence[float]) -> float:
        u = np.asarray(point, dtype=float)
        if u.shape != (self.space.nvars,):
            raise PolynomialError(f"point has shape {u.shape}, expected ({self.space.nvars},)")
        if not np.all(np.isfinite(u)):
            raise PolynomialError("point has non-finite entries")
        total = 0.0
        for e, c in self._terms.items():
            term = c
            for k, a in enumerate(e):
                if a:
                    term *= u[k] ** a
            total += term
        return float(total)

    __call__ = evaluate

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        """Vectorised evaluation at the rows of ``points``."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        if not self._terms:
            return np.zeros(P.shape[0])
        E = np.array(list(self._terms.keys()), dtype=float)
        C = np.array(list(self._terms.values()))
        # products of powers; 0**0 == 1 in numpy
        vals = np.prod(P[:, None, :] ** E[None, :, :], axis=2)
        return vals @ C

    def homogeneous_degree(self) -> "HomogeneityReport":
        if not self._terms:
            return HomogeneityReport(True, 0, is_zero=True)
        degs = {sum(e) for e in self._terms}
        if len(degs) == 1:
            return HomogeneityReport(True, degs.pop())
        return HomogeneityReport(False, max(degs), degrees=tuple(sorted(degs)))

    def terms_of_degree(self, d: int) -> "Polynomial":
        return Polynomial(self.space, {e: c for e, c in self._terms.items() if sum(e) == d})

    # --- text ----------------------------------------------------------------

    def to_text(self) -> str:
        if not self._terms:
            return "0"
        names = self.space.var_names()
        parts: list[str] = []
        for e, c in self._terms.items():
            mono = "*".join(
                names[k] if a == 1 else f"{names[k]}^{a}" for k, a in enumerate(e) if a
            )
            sign = "-" if c < 0 else "+"
            mag = abs(c)
            if not mono:
                body = _format_coef(mag)
            elif mag == 1.0:
                body = mono
            else:
                body = f"{_format_coef(mag)}*{mono}"
            parts.append((sign, body))
        first_sign, first = parts[0]
        out = ("-" if first_sign == "-" else "") + first
        for s, b in parts[1:]:
            out += f" {s} {b}"
        return out

    def __str__(self) -> str:
        return self.to_text()

    def __repr__(self) -> str:
        return f"Polynomial({self.to_text()!r}, n={self.space.n}, m={self.space.m})"


@dataclass(frozen=True)
class HomogeneityReport:
    homogeneous: bool
    degree: int
    is_zero: bool = False
    degrees: tuple[int, ...] = ()

    def __bool__(self) -> bool:
        return self.homogeneous


def homogeneous_degree(p: Polynomial) -> HomogeneityReport:
    return p.homogeneous_degree()


def add(p: Polynomial, q: Polynomial) -> Polynomial:
    return p + q


def multiply(p: Polynomial, q: Polynomial) -> Polynomial:
    return p * q


def differentiate(p: Polynomial, var_index: int) -> Polynomial:
    return p.differentiate(var_index)


def evaluate(p: Polynomial, point: Sequence[float]) -> float:
    return p.evaluate(point)


# --- parsing ----------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<var>x_\d+_\d+|x\d+|y_?\d+)
  | (?P<op>[-+*^()])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), pos))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


def _resolve_var(name: str, space: VarSpace, pos: int, text: str) -> int:
    if name.startswith("y"):
        t = int(name.lstrip("y_"))
        if not 1 <= t <= space.m:
            raise ParseError(f"variable {name} out of range for m={space.m}", pos, text)
        return space.y_index(t - 1)
    if name.startswith("x_"):
        _, i, j = name.split("_")
        i, j = int(i), int(j)
    else:
        digits = name[1:]
        if len(digits) != 2:
            raise ParseError(f"unknown variable {name!r} (use x_i_j when n > 9)", pos, text)
        i, j = int(digits[0]), int(digits[1])
    if not (1 <= i <= j <= space.n):
        raise ParseError(f"variable {name} out of range for n={space.n}", pos, text)
    return space.x_index(i - 1, j - 1)


def parse_polynomial(text: str, space: VarSpace) -> Polynomial:
    """Parse ``text`` in the term grammar (``3*x11^2*x12 - x22 + 0.5``).

    Raises :class:`ParseError` with the offending position.
    """
    toks = _tokenize(text)
    i = 0
    acc: dict[Exponent, float] = {}
    nv = space.nvars

    def peek():
        return toks[i]

    first = True
    while True:
        kind, val, pos = peek()
        sign = 1.0
        if kind == "op" and val in "+-":
            sign = -1.0 if val == "-" else 1.0
            i += 1
        elif not first:
            if kind == "end":
                break
            raise ParseError(f"expected '+' or '-', got {val!r}", pos, text)
        elif kind == "end":
            raise ParseError("empty polynomial", pos, text)
        first = False

        # term := [coef]['*'] mono | coef
        kind, val, pos = peek()
        coef = 1.0
        have_coef = False
        if kind == "num":
            coef = float(val)
            have_coef = True
            i += 1
            kind, val, pos = peek()
            if kind == "op" and val == "*":
                i += 1
                kind, val, pos = peek()
                if kind != "var":
                    raise ParseError("expected variable after '*'", pos, text)
        exps = [0] * nv
        nvar = 0
        while kind == "var":
            k = _resolve_var(val, space, pos, text)
            i += 1
            power = 1
            kind, val, pos = peek()
            if kind == "op" and val == "^":
                i += 1
                kind, val, pos = peek()
                if kind != "num" or not val.isdigit():
                    raise ParseError("expected integer exponent", pos, text)
                power = int(val)
                i += 1
            exps[k] += power
            nvar += 1
            kind, val, pos = peek()
            if kind == "op" and val == "*":
                i += 1
                kind, val, pos = peek()
                if kind != "var":
                    raise ParseError("expected variable after '*'", pos, text)
        if not have_coef and nvar == 0:
            raise ParseError(f"expected coefficient or variable, got {val or 'end of input'!r}", pos, text)
        e = tuple(exps)
        acc[e] = acc.get(e, 0.0) + sign * coef
        kind, val, pos = peek()
        if kind == "end":
            break
        if not (kind == "op" and val in "+-"):
            raise ParseError(f"unexpected token {val!r}", pos, text)
    return Polynomial(space, acc)


# --- polynomial matrices ------------------------------------------------------


@dataclass(frozen=True)
class PolyMatrix:
    """Row-major matrix of polynomials sharing one space."""

    rows: int
    cols: int
    entries: tuple[Polynomial, ...] = field(repr=False)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("matrix dimensions must be positive")
        if len(self.entries) != self.rows * self.cols:
            raise ValueError("entry count does not match shape")
        spaces = {p.space for p in self.entries}
        if len(spaces) != 1:
            raise SpaceMismatch("matrix entries live in different spaces")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Polynomial]]) -> "PolyMatrix":
        r = len(rows)
        c = len(rows[0])
        if any(len(row) != c for row in rows):
            raise ValueError("ragged rows")
        return cls(r, c, tuple(p for row in rows for p in row))

    @property
    def space(self) -> VarSpace:
        return self.entries[0].space

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def __getitem__(self, ij: tuple[int, int]) -> Polynomial:
        i, j = ij
        return self.entries[i * self.cols + j]

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    @property
    def is_symmetric(self) -> bool:
        if not self.is_square:
            return False
        return all(self[i, j] == self[j, i] for i in range(self.rows) for j in range(i + 1, self.cols))

    @property
    def degree(self) -> int:
        return max(p.degree for p in self.entries)

    def __matmul__(self, other: "PolyMatrix") -> "PolyMatrix":
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        out = []
        zero = Polynomial.zero(self.space)
        for i in range(self.rows):
            for j in range(other.cols):
                acc = zero
                for k in range(self.cols):
                    acc = acc + self[i, k] * other[k, j]
                out.append(acc)
        return PolyMatrix(self.rows, other.cols, tuple(out))

    def evaluate(self, point: Sequence[float]) -> np.ndarray:
        vals = np.array([p.evaluate(point) for p in self.entries])
        return vals.reshape(self.rows, self.cols)

    def trace(self) -> Polynomial:
        if not self.is_square:
            raise ValueError("trace of a non-square matrix")
        acc = Polynomial.zero(self.space)
        for i in range(self.rows):
            acc = acc + self[i, i]
        return acc

    def to_text_rows(self) -> list[list[str]]:
        return [[self[i, j].to_text() for j in range(self.cols)] for i in range(self.rows)]


def monomial_count(nvars: int, degree: int) -> int:
    """``|N_degree^nvars| = C(nvars + degree, degree)``."""
    return math.comb(nvars + degree, degree)


def iter_exponents(nvars: int, degree: int) -> Iterable[Exponent]:
    """Exponents of total degree ``<= degree`` in graded lexicographic order."""
    from itertools import combinations_with_replacement

    for d in range(degree + 1):
        for combo in combinations_with_replacement(range(nvars), d):
            e = [0] * nvars
            for k in combo:
                e[k] += 1
            yield tuple(e)
