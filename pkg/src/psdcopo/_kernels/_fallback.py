"""Pure numpy Schur-complement assembly.

For a block with factor ``F`` the contribution is ``Q^T Q`` where row
``alpha`` of ``Q`` is ``svec(F^T B_alpha F)``; the products go through BLAS.
"""

import numpy as np

# rows of Q per chunk; bounds the dense (chunk, n, n) workspace
_CHUNK_ENTRIES = 4_000_000


def _dense_blocks(a, b, loc, val, m, n):
    B = np.zeros((m, n, n))
    np.add.at(B, (loc, a, b), val)
    off = a != b
    np.add.at(B, (loc[off], b[off], a[off]), val[off])
    return B


def schur_complement(structs, factors, nz):
    H = np.zeros((nz, nz))
    for (a, b, alpha, val), F in zip(structs, factors):
        n = F.shape[0]
        support, loc = np.unique(alpha, return_inverse=True)
        m = support.size
        iu = np.triu_indices(n)
        w = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
        Q = np.empty((m, iu[0].size))
        step = max(1, _CHUNK_ENTRIES // (n * n))
        order = np.argsort(loc, kind="stable")
        loc_s, a_s, b_s, v_s = loc[order], a[order], b[order], val[order]
        bounds = np.searchsorted(loc_s, np.arange(0, m + step, step))
        for ci, lo in enumerate(range(0, m, step)):
            hi = min(m, lo + step)
            s, e = bounds[ci], bounds[ci + 1] if ci + 1 < len(bounds) else len(loc_s)
            Bc = _dense_blocks(a_s[s:e], b_s[s:e], loc_s[s:e] - lo, v_s[s:e], hi - lo, n)
            T = F.T @ Bc @ F
            Q[lo:hi] = T[:, iu[0], iu[1]] * w
        H[np.ix_(support, support)] += Q @ Q.T
    return H
