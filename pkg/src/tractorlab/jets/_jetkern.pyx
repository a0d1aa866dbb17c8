# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled multiply-accumulate kernels for truncated jet coefficient vectors.

Semantics match tractorlab.jets._kern_py exactly; these loops are the hot
path of every curvature computation.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def mul_rows(const double[:, ::1] a, const double[:, ::1] b, double[:, ::1] out,
             const long[::1] ii, const long[::1] jj, const long[::1] kk):
    """out[m, kk[t]] += a[m, ii[t]] * b[m, jj[t]] for every row m."""
    cdef Py_ssize_t nrow = a.shape[0]
    cdef Py_ssize_t nt = ii.shape[0]
    cdef Py_ssize_t m, t
    with nogil:
        for m in range(nrow):
            for t in range(nt):
                out[m, kk[t]] += a[m, ii[t]] * b[m, jj[t]]


def mul_rows_single(const double[::1] a, const double[:, ::1] b, double[:, ::1] out,
                    const long[::1] ii, const long[::1] jj, const long[::1] kk):
    """out[m, kk[t]] += a[ii[t]] * b[m, jj[t]] for every row m."""
    cdef Py_ssize_t nrow = b.shape[0]
    cdef Py_ssize_t nt = ii.shape[0]
    cdef Py_ssize_t m, t
    cdef double av
    with nogil:
        for t in range(nt):
            av = a[ii[t]]
            if av == 0.0:
                continue
            for m in range(nrow):
                out[m, kk[t]] += av * b[m, jj[t]]
