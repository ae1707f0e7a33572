# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled CSR kernels for the binary feature matrix (implicit unit values).

Same call surface as `_kernels_py`; row segments are accumulated left to
right in index order.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "cython"


def matvec(const cnp.int32_t[::1] indptr, const cnp.int32_t[::1] indices,
           const cnp.float64_t[::1] v, Py_ssize_t n_rows):
    out_arr = np.zeros(n_rows, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    cdef Py_ssize_t i, p
    cdef cnp.float64_t acc
    for i in range(n_rows):
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc += v[indices[p]]
        out[i] = acc
    return out_arr


def rmatvec(const cnp.int32_t[::1] indptr, const cnp.int32_t[::1] indices,
            const cnp.float64_t[::1] u, Py_ssize_t n_cols):
    out_arr = np.zeros(n_cols, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    cdef Py_ssize_t i, p
    cdef Py_ssize_t n_rows = indptr.shape[0] - 1
    cdef cnp.float64_t ui
    for i in range(n_rows):
        ui = u[i]
        for p in range(indptr[i], indptr[i + 1]):
            out[indices[p]] += ui
    return out_arr


def matmat(const cnp.int32_t[::1] indptr, const cnp.int32_t[::1] indices,
           const cnp.float64_t[:, ::1] B, Py_ssize_t n_rows):
    cdef Py_ssize_t k = B.shape[1]
    out_arr = np.zeros((n_rows, k), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] out = out_arr
    cdef Py_ssize_t i, p, c, j
    for i in range(n_rows):
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            for c in range(k):
                out[i, c] += B[j, c]
    return out_arr


def rmatmat(const cnp.int32_t[::1] indptr, const cnp.int32_t[::1] indices,
            const cnp.float64_t[:, ::1] U, Py_ssize_t n_cols):
    cdef Py_ssize_t k = U.shape[1]
    out_arr = np.zeros((n_cols, k), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] out = out_arr
    cdef Py_ssize_t i, p, c, j
    cdef Py_ssize_t n_rows = indptr.shape[0] - 1
    for i in range(n_rows):
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            for c in range(k):
                out[j, c] += U[i, c]
    return out_arr


def column_support(const cnp.int32_t[::1] indices, Py_ssize_t n_cols):
    out_arr = np.zeros(n_cols, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef Py_ssize_t p
    for p in range(indices.shape[0]):
        out[indices[p]] += 1
    return out_arr
