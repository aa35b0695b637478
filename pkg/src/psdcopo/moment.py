"""Monomial bases, the Riesz functional and localizing matrices.

A truncated moment vector ``z`` is a dense array indexed by the monomial
basis of degree ``2k``.  Localizing matrices are linear in ``z``; they are
stored as sparse ``(rows*cols, nz)`` coefficient matrices so that
``L(z) = (coeffs @ z).reshape(rows, cols)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .poly import PolyMatrix, Polynomial, VarSpace, iter_exponents


class MomentError(ValueError):
    pass


class MonomialBasis:
    """All monomials of degree ``<= degree`` in graded lexicographic order."""

    def __init__(self, nvars: int, degree: int, space: VarSpace | None = None):
        if degree < 0:
            raise MomentError(f"degree must be >= 0, got {degree}")
        self.nvars = nvars
        self.degree = degree
        self.space = space
        self.exponents = np.array(list(iter_exponents(nvars, degree)), dtype=np.int64).reshape(-1, nvars)
        self._radix = degree + 1
        keys = self._encode(self.exponents)
        self._order = np.argsort(keys, kind="stable")
        self._sorted_keys = keys[self._order]

    @classmethod
    def of(cls, space: VarSpace, degree: int) -> "MonomialBasis":
        return cls(space.nvars, degree, space)

    def __len__(self) -> int:
        return self.exponents.shape[0]

    @property
    def size(self) -> int:
        return len(self)

    @cached_property
    def monomials(self) -> list[tuple[int, ...]]:
        return [tuple(int(a) for a in row) for row in self.exponents]

    @cached_property
    def index(self) -> dict[tuple[int, ...], int]:
        return {e: i for i, e in enumerate(self.monomials)}

    def _encode(self, E: np.ndarray) -> np.ndarray:
        weights = self._radix ** np.arange(self.nvars, dtype=np.int64)
        return E @ weights

    def lookup(self, E: np.ndarray) -> np.ndarray:
        """Positions of the exponent rows ``E``; raises if any is missing."""
        E = np.asarray(E, dtype=np.int64).reshape(-1, self.nvars)
        if E.size and (E.sum(axis=1).max() > self.degree or E.min() < 0):
            raise MomentError("exponent outside the basis")
        keys = self._encode(E)
        pos = np.searchsorted(self._sorted_keys, keys)
        pos = np.minimum(pos, len(self._sorted_keys) - 1)
        if not np.array_equal(self._sorted_keys[pos], keys):
            raise MomentError("exponent outside the basis")
        return self._order[pos]

    def dirac(self, point) -> np.ndarray:
        """Moment vector ``[u]_degree`` of the point mass at ``point``."""
        u = np.asarray(point, dtype=float)
        return np.prod(u[None, :] ** self.exponents, axis=1)

    def truncate(self, z: np.ndarray, degree: int) -> np.ndarray:
        """Entries of ``z`` belonging to monomials of degree ``<= degree``."""
        return z[: math.comb(self.nvars + degree, degree)]


def monomial_basis(space: VarSpace, degree: int) -> MonomialBasis:
    return MonomialBasis.of(space, degree)


def coefficient_vector(p: Polynomial, basis: MonomialBasis) -> np.ndarray:
    """Dense coefficients of ``p`` in ``basis``."""
    if p.degree > basis.degree:
        raise MomentError(f"degree {p.degree} exceeds basis degree {basis.degree}")
    c = np.zeros(len(basis))
    if not p.is_zero:
        E = np.array([e for e, _ in p.items()])
        c[basis.lookup(E)] = [v for _, v in p.items()]
    return c


def riesz_apply(p: Polynomial, z: np.ndarray, basis: MonomialBasis) -> float:
    """``<p, z> = sum_alpha p_alpha z_alpha``."""
    if p.degree > basis.degree:
        raise MomentError(f"degree {p.degree} exceeds moment order {basis.degree}")
    return float(coefficient_vector(p, basis) @ np.asarray(z, dtype=float))


@dataclass(frozen=True)
class LinearMatrixMap:
    """Affine-free linear map ``z -> (coeffs @ z).reshape(rows, cols)``."""

    rows: int
    cols: int
    coeffs: sp.csr_matrix
    symmetric: bool
    label: str = ""

    @property
    def dim(self) -> int:
        return self.rows

    @property
    def nz(self) -> int:
        return self.coeffs.shape[1]

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(self.coeffs @ np.asarray(z, dtype=float)).reshape(self.rows, self.cols)

    evaluate = __call__

    def adjoint(self, Z: np.ndarray) -> np.ndarray:
        """``L^*(Z)``: the vector with entries ``<B_alpha, Z>``."""
        return np.asarray(self.coeffs.T @ np.asarray(Z, dtype=float).reshape(-1)).ravel()

    def entry_rows(self, upper_only: bool | None = None) -> sp.csr_matrix:
        """Functionals of the individual entries (upper triangle if symmetric)."""
        if upper_only is None:
            upper_only = self.symmetric
        if not upper_only:
            return self.coeffs
        r, c = np.triu_indices(self.rows)
        return self.coeffs[r * self.cols + c]

    @cached_property
    def upper_coo(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(a, b, alpha, value)`` for every nonzero with ``a <= b``."""
        if not self.symmetric:
            raise MomentError("upper-triangle structure needs a symmetric map")
        C = self.coeffs.tocoo()
        a, b = np.divmod(C.row, self.cols)
        keep = a <= b
        return (
            a[keep].astype(np.int64),
            b[keep].astype(np.int64),
            C.col[keep].astype(np.int64),
            C.data[keep].astype(float),
        )

    @cached_property
    def support(self) -> np.ndarray:
        """Moment indices touched by the map."""
        return np.unique(self.coeffs.indices)


def _truncation(deg: int, k: int) -> int:
    t = k - math.ceil(max(deg, 0) / 2)
    if t < 0:
        raise MomentError(f"order {k} too small for degree {deg}")
    return t


def _entry_coo(
    q: Polynomial, Bt: np.ndarray, big: MonomialBasis, row_off: int, col_off: int, ncols: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    D = Bt.shape[0]
    pair = Bt[:, None, :] + Bt[None, :, :]  # (D, D, nv)
    rows, cols, vals = [], [], []
    aa, bb = np.meshgrid(np.arange(D), np.arange(D), indexing="ij")
    flat = ((aa + row_off) * ncols + (bb + col_off)).ravel()
    for gamma, c in q.items():
        E = (pair + np.asarray(gamma)[None, None, :]).reshape(-1, Bt.shape[1])
        rows.append(flat)
        cols.append(big.lookup(E))
        vals.append(np.full(flat.shape, c))
    if not rows:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def localizing_map(q: Polynomial, k: int, label: str = "") -> LinearMatrixMap:
    """``L_q^{(k)}``; ``q = 1`` gives the moment matrix ``M_k``."""
    space = q.space
    t = _truncation(q.degree, k)
    big = _basis(space, 2 * k)
    Bt = _basis(space, t).exponents
    D = Bt.shape[0]
    r, c, v = _entry_coo(q, Bt, big, 0, 0, D)
    coeffs = sp.csr_matrix((v, (r, c)), shape=(D * D, len(big)))
    coeffs.sum_duplicates()
    coeffs.eliminate_zeros()
    return LinearMatrixMap(D, D, coeffs, True, label)


def moment_matrix_map(space: VarSpace, k: int) -> LinearMatrixMap:
    return localizing_map(Polynomial.constant(space, 1.0), k, label="M")


def block_localizing_map(T: PolyMatrix, k: int, label: str = "") -> LinearMatrixMap:
    """Block localizing matrix with one truncation order for every block."""
    space = T.space
    t = _truncation(T.degree, k)
    big = _basis(space, 2 * k)
    Bt = _basis(space, t).exponents
    D = Bt.shape[0]
    ncols = T.cols * D
    rs, cs, vs = [], [], []
    for i in range(T.rows):
        for j in range(T.cols):
            r, c, v = _entry_coo(T[i, j], Bt, big, i * D, j * D, ncols)
            rs.append(r)
            cs.append(c)
            vs.append(v)
    coeffs = sp.csr_matrix(
        (np.concatenate(vs), (np.concatenate(rs), np.concatenate(cs))), shape=(T.rows * D * ncols, len(big))
    )
    coeffs.sum_duplicates()
    coeffs.eliminate_zeros()
    return LinearMatrixMap(T.rows * D, ncols, coeffs, T.is_symmetric, label)


_BASIS_CACHE: dict[tuple[int, int], MonomialBasis] = {}


def _basis(space: VarSpace, degree: int) -> MonomialBasis:
    key = (space.nvars, degree)
    b = _BASIS_CACHE.get(key)
    if b is None:
        b = MonomialBasis(space.nvars, degree, space)
        _BASIS_CACHE[key] = b
    return b


def moment_submatrix(z: np.ndarray, space: VarSpace, t: int) -> np.ndarray:
    """``M_t[z]`` for a moment vector over any degree ``>= 2t``."""
    nz_needed = math.comb(space.nvars + 2 * t, 2 * t)
    L = moment_matrix_map(space, t)
    return L(np.asarray(z)[:nz_needed])
