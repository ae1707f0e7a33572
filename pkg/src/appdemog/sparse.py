"""Compressed sparse row storage for binary feature matrices.

Every stored entry has implicit value 1 (a user used an app at least once),
so the matrix holds only `row_offsets` and `col_indices`. Matrices are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .backend import kernels
from .errors import DataFormatError

_INT_MAX = np.iinfo(np.int32).max


class SparseBinaryMatrix:
    """Users-by-apps incidence matrix in CSR form with implicit unit values.

    `row_offsets` has length n_rows+1; the column indices of row i are
    ``col_indices[row_offsets[i]:row_offsets[i+1]]``, strictly increasing,
    duplicate-free.
    """

    __slots__ = ("n_rows", "n_cols", "row_offsets", "col_indices")

    def __init__(self, n_rows: int, n_cols: int, row_offsets, col_indices):
        row_offsets = np.ascontiguousarray(row_offsets, dtype=np.int32)
        col_indices = np.ascontiguousarray(col_indices, dtype=np.int32)
        if n_rows < 0 or n_cols < 0 or max(n_rows, n_cols) > _INT_MAX:
            raise DataFormatError(f"matrix shape out of range: {n_rows}x{n_cols}")
        if row_offsets.shape != (n_rows + 1,):
            raise DataFormatError("row_offsets must have length n_rows+1")
        if row_offsets[0] != 0 or row_offsets[-1] != len(col_indices):
            raise DataFormatError("row_offsets must start at 0 and end at nnz")
        if np.any(np.diff(row_offsets) < 0):
            raise DataFormatError("row_offsets must be non-decreasing")
        if len(col_indices) and (col_indices.min() < 0 or col_indices.max() >= n_cols):
            raise DataFormatError("column index out of range")
        for arr in (row_offsets, col_indices):
            arr.flags.writeable = False
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.row_offsets = row_offsets
        self.col_indices = col_indices

    @classmethod
    def from_triplets(
        cls, pairs: Iterable[tuple[int, int]], n_rows: int, n_cols: int
    ) -> "SparseBinaryMatrix":
        """Build from (row, col) pairs; duplicates collapse to one entry."""
        arr = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs)
        if arr.size == 0:
            return cls(n_rows, n_cols, np.zeros(n_rows + 1, dtype=np.int32), [])
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise DataFormatError("pairs must be (row, col) tuples")
        rows, cols = arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64)
        bad = (rows < 0) | (rows >= n_rows) | (cols < 0) | (cols >= n_cols)
        if bad.any():
            i = int(np.argmax(bad))
            raise DataFormatError(
                f"triplet ({rows[i]}, {cols[i]}) outside {n_rows}x{n_cols} matrix"
            )
        keys = np.unique(rows * np.int64(n_cols) + cols)
        rows, cols = keys // n_cols, keys % n_cols
        offsets = np.zeros(n_rows + 1, dtype=np.int64)
        np.add.at(offsets, rows + 1, 1)
        np.cumsum(offsets, out=offsets)
        return cls(n_rows, n_cols, offsets, cols)

    @property
    def nnz(self) -> int:
        return int(len(self.col_indices))

    def row_cols(self, i: int) -> np.ndarray:
        """Column indices of row i (read-only view)."""
        return self.col_indices[self.row_offsets[i] : self.row_offsets[i + 1]]

    def matvec(self, v) -> np.ndarray:
        """M @ v for a dense vector v of length n_cols."""
        v = np.ascontiguousarray(v, dtype=np.float64)
        if v.shape != (self.n_cols,):
            raise DataFormatError(f"matvec expects length {self.n_cols}, got {v.shape}")
        return kernels.matvec(self.row_offsets, self.col_indices, v, self.n_rows)

    def transpose_matvec(self, u) -> np.ndarray:
        """M.T @ u for a dense vector u of length n_rows."""
        u = np.ascontiguousarray(u, dtype=np.float64)
        if u.shape != (self.n_rows,):
            raise DataFormatError(
                f"transpose_matvec expects length {self.n_rows}, got {u.shape}"
            )
        return kernels.rmatvec(self.row_offsets, self.col_indices, u, self.n_cols)

    def matmat(self, B) -> np.ndarray:
        """M @ B for a dense (n_cols, k) matrix B."""
        B = np.ascontiguousarray(B, dtype=np.float64)
        if B.ndim != 2 or B.shape[0] != self.n_cols:
            raise DataFormatError(f"matmat expects ({self.n_cols}, k), got {B.shape}")
        return kernels.matmat(self.row_offsets, self.col_indices, B, self.n_rows)

    def transpose_matmat(self, U) -> np.ndarray:
        """M.T @ U for a dense (n_rows, k) matrix U."""
        U = np.ascontiguousarray(U, dtype=np.float64)
        if U.ndim != 2 or U.shape[0] != self.n_rows:
            raise DataFormatError(
                f"transpose_matmat expects ({self.n_rows}, k), got {U.shape}"
            )
        return kernels.rmatmat(self.row_offsets, self.col_indices, U, self.n_cols)

    def column_support(self) -> np.ndarray:
        """Number of rows containing each column."""
        return kernels.column_support(self.col_indices, self.n_cols)

    def row_counts(self) -> np.ndarray:
        """Number of entries in each row (apps per user)."""
        return np.diff(self.row_offsets).astype(np.int64)

    def select(self, axis: str, keep: Sequence[int]) -> "SparseBinaryMatrix":
        """Submatrix keeping the given rows or columns, reindexed in `keep` order."""
        keep = np.asarray(keep, dtype=np.int64)
        n_axis = self.n_rows if axis == "rows" else self.n_cols
        if axis not in ("rows", "cols"):
            raise DataFormatError(f"axis must be 'rows' or 'cols', got {axis!r}")
        if keep.size and (keep.min() < 0 or keep.max() >= n_axis):
            raise DataFormatError(f"select index out of range for axis {axis}")
        if len(np.unique(keep)) != len(keep):
            raise DataFormatError("select indices must be duplicate-free")
        if axis == "rows":
            counts = np.diff(self.row_offsets)[keep]
            offsets = np.zeros(len(keep) + 1, dtype=np.int64)
            np.cumsum(counts, out=offsets[1:])
            chunks = [self.row_cols(int(i)) for i in keep]
            cols = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int32)
            return SparseBinaryMatrix(len(keep), self.n_cols, offsets, cols)
        remap = np.full(self.n_cols, -1, dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        new_cols = remap[self.col_indices]
        mask = new_cols >= 0
        row_of = np.repeat(np.arange(self.n_rows), np.diff(self.row_offsets))[mask]
        new_cols = new_cols[mask]
        order = np.lexsort((new_cols, row_of))
        offsets = np.zeros(self.n_rows + 1, dtype=np.int64)
        np.add.at(offsets, row_of + 1, 1)
        np.cumsum(offsets, out=offsets)
        return SparseBinaryMatrix(self.n_rows, len(keep), offsets, new_cols[order])

    def to_dense(self) -> np.ndarray:
        """Dense float64 copy (tests and small matrices only)."""
        out = np.zeros((self.n_rows, self.n_cols), dtype=np.float64)
        row_of = np.repeat(np.arange(self.n_rows), np.diff(self.row_offsets))
        out[row_of, self.col_indices] = 1.0
        return out

    def triplets(self) -> list[tuple[int, int]]:
        """All (row, col) entries in row-major order."""
        row_of = np.repeat(np.arange(self.n_rows), np.diff(self.row_offsets))
        return list(zip(row_of.tolist(), self.col_indices.tolist()))

    def __repr__(self) -> str:
        return (
            f"SparseBinaryMatrix({self.n_rows}x{self.n_cols}, nnz={self.nnz})"
        )
