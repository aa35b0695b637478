# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Schur-complement accumulation for sparse symmetric LMI blocks."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def schur_accumulate(const long long[::1] a, const long long[::1] b,
                     const long long[::1] alpha, const double[::1] val,
                     const double[:, ::1] W, double[:, ::1] H):
    """H[alpha_e, alpha_f] += <B_e, W B_f W> over upper-triangle entries.

    Each entry e = (a, b, alpha, val) with a <= b stands for the symmetric
    pair of matrix positions (a, b), (b, a).
    """
    cdef Py_ssize_t ne = a.shape[0]
    cdef Py_ssize_t e, f
    cdef long long ae, be, al, af, bf, alf
    cdef double ve, vf, se, t
    with nogil:
        for e in range(ne):
            ae = a[e]
            be = b[e]
            al = alpha[e]
            ve = val[e]
            se = 1.0 if ae == be else 2.0
            ve = ve * se * 0.5
            for f in range(e, ne):
                af = a[f]
                bf = b[f]
                alf = alpha[f]
                vf = val[f]
                if af != bf:
                    vf = vf * 2.0
                t = ve * vf * (W[ae, af] * W[be, bf] + W[ae, bf] * W[be, af])
                H[al, alf] += t
                if f != e:
                    H[alf, al] += t
