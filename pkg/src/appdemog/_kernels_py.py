"""Pure-numpy CSR kernels, used when the compiled extension is unavailable.

All kernels operate on the raw CSR arrays of a binary matrix (implicit unit
values): `indptr` of length n_rows+1 and `indices` of length nnz, both int32.
Row segments are summed left to right so results agree with the compiled
backend to floating-point roundoff.
"""

import numpy as np

NAME = "python"


def matvec(indptr, indices, v, n_rows):
    """out[i] = sum of v[j] over the column indices of row i."""
    out = np.zeros(n_rows, dtype=np.float64)
    if len(indices) == 0:
        return out
    gathered = v[indices]
    starts = indptr[:-1]
    nonempty = indptr[1:] > starts
    # reduceat over the starts of non-empty rows: empty rows occupy zero
    # length, so consecutive non-empty starts delimit exact row segments.
    out[nonempty] = np.add.reduceat(gathered, starts[nonempty])
    return out


def rmatvec(indptr, indices, u, n_cols):
    """out[j] = sum of u[i] over rows i that contain column j."""
    if len(indices) == 0:
        return np.zeros(n_cols, dtype=np.float64)
    row_of = np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))
    return np.bincount(indices, weights=u[row_of], minlength=n_cols).astype(np.float64)


def matmat(indptr, indices, B, n_rows):
    """Dense product M @ B for CSR binary M; B is (n_cols, k)."""
    k = B.shape[1]
    out = np.zeros((n_rows, k), dtype=np.float64)
    if len(indices) == 0:
        return out
    gathered = B[indices, :]
    starts = indptr[:-1]
    nonempty = indptr[1:] > starts
    out[nonempty, :] = np.add.reduceat(gathered, starts[nonempty], axis=0)
    return out


def rmatmat(indptr, indices, U, n_cols):
    """Dense product M.T @ U for CSR binary M; U is (n_rows, k)."""
    k = U.shape[1]
    out = np.zeros((n_cols, k), dtype=np.float64)
    if len(indices) == 0:
        return out
    row_of = np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))
    np.add.at(out, indices, U[row_of, :])
    return out


def column_support(indices, n_cols):
    """Number of rows containing each column."""
    return np.bincount(indices, minlength=n_cols).astype(np.int64)
