"""Hot kernels for the interior-point solver.

The compiled extension ``_schur`` is used when it was built; otherwise the
numpy implementation in :mod:`._fallback` is selected.  Set
``PSDCOPO_PURE_PYTHON=1`` to force the fallback.

The two scale differently.  The compiled loop visits every pair of stored
entries, so its cost is ``nnz**2``; the numpy path pays for dense products
through BLAS, roughly ``support * n**3 + support**2 * n**2``.  With the
``auto`` backend, the default once the extension exists, each block goes to
whichever is cheaper.
"""

import os

import numpy as np

from . import _fallback

BACKEND = "python"
_compiled = None

if not os.environ.get("PSDCOPO_PURE_PYTHON"):
    try:
        from . import _schur as _compiled

        BACKEND = "auto"
    except ImportError:  # extension not built
        _compiled = None


def schur_complement(structs, factors, nz, backend=None):
    """Assemble ``H = sum_j P_j^T (W_j kron W_j) P_j`` with ``W_j = F_j F_j^T``.

    ``structs[j]`` is the upper-triangle COO tuple ``(a, b, alpha, val)`` of
    block ``j`` and ``factors[j]`` the factor ``F_j``.
    """
    backend = backend or BACKEND
    if backend == "auto":
        if _compiled is None:
            return _fallback.schur_complement(structs, factors, nz)
        return _schur_auto(structs, factors, nz)
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernel is not available")
        return _schur_cython(structs, factors, nz)
    if backend == "python":
        return _fallback.schur_complement(structs, factors, nz)
    raise ValueError(f"unknown kernel backend {backend!r}")


def _accumulate(H, struct, F):
    a, b, alpha, val = struct
    W = np.ascontiguousarray(F @ F.T)
    _compiled.schur_accumulate(
        np.ascontiguousarray(a, dtype=np.int64),
        np.ascontiguousarray(b, dtype=np.int64),
        np.ascontiguousarray(alpha, dtype=np.int64),
        np.ascontiguousarray(val, dtype=float),
        W,
        H,
    )


def _schur_cython(structs, factors, nz):
    H = np.zeros((nz, nz))
    for struct, F in zip(structs, factors):
        _accumulate(H, struct, F)
    return H


# measured: one compiled pair update costs about as much as 30 BLAS flops,
# and a numpy call carries roughly 1e6 flops of fixed overhead
_PAIR_COST = 30.0
_NUMPY_OVERHEAD = 1e6


def prefers_compiled(struct, n):
    """Cost model for one block; ``struct`` is its upper-triangle COO tuple."""
    nnz = len(struct[0])
    support = len(np.unique(struct[2]))
    blas = _NUMPY_OVERHEAD + 2.0 * support * n**3 + support**2 * n * (n + 1) / 2.0
    return _PAIR_COST * nnz * nnz < blas


def _schur_auto(structs, factors, nz):
    H = np.zeros((nz, nz))
    rest_s, rest_f = [], []
    for struct, F in zip(structs, factors):
        if prefers_compiled(struct, F.shape[0]):
            _accumulate(H, struct, F)
        else:
            rest_s.append(struct)
            rest_f.append(F)
    if rest_s:
        H += _fallback.schur_complement(rest_s, rest_f, nz)
    return H


def available_backends():
    return ["auto", "cython", "python"] if _compiled is not None else ["python"]
