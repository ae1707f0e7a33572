"""Dimensionality reduction for the app feature matrix.

Three paths: dropping rare apps by usage share, aggregating apps to
category counts, and truncated SVD of the raw binary matrix computed by
randomized range finding. All emit dense feature matrices accepted by the
logistic model's dense adapter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DataFormatError, NumericalError
from .sampling import _seedseq
from .sparse import SparseBinaryMatrix


@dataclass(frozen=True)
class CategoryMap:
    """Category id per app plus the category name list."""

    category_ids: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        ids = np.ascontiguousarray(self.category_ids, dtype=np.int32)
        if ids.ndim != 1:
            raise DataFormatError("category_ids must be 1-D")
        if ids.size and (ids.min() < 0 or ids.max() >= len(self.names)):
            raise DataFormatError("category id outside the name list")
        ids.flags.writeable = False
        object.__setattr__(self, "category_ids", ids)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def n_categories(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class SvdFactors:
    """Top-k singular values and right singular vectors (rows orthonormal)."""

    k: int
    singular_values: np.ndarray
    right_vectors: np.ndarray

    def __post_init__(self):
        s = np.ascontiguousarray(self.singular_values, dtype=np.float64)
        v = np.ascontiguousarray(self.right_vectors, dtype=np.float64)
        if s.shape != (self.k,) or v.shape[0] != self.k:
            raise DataFormatError("factor shapes inconsistent with k")
        if np.any(np.diff(s) > 1e-9 * max(s[0] if len(s) else 0.0, 1e-300)):
            raise DataFormatError("singular values must be non-increasing")
        if len(s) and s[-1] < -1e-12:
            raise DataFormatError("singular values must be non-negative")
        for arr in (s, v):
            arr.flags.writeable = False
        object.__setattr__(self, "singular_values", s)
        object.__setattr__(self, "right_vectors", v)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "singular_values": self.singular_values.tolist(),
            "right_vectors": self.right_vectors.tolist(),
        }


def frequency_filter(X: SparseBinaryMatrix, min_share: float) -> np.ndarray:
    """Column indices of apps used by at least `min_share` of the users.

    The threshold is ceil(min_share * n_rows) computed in exact rational
    arithmetic, so decimal shares like 0.1 behave as written.
    """
    if not 0 <= min_share <= 1:
        raise DataFormatError(f"min_share must be in [0, 1], got {min_share}")
    threshold = math.ceil(Fraction(str(min_share)) * X.n_rows)
    support = X.column_support()
    return np.nonzero(support >= threshold)[0]


def category_aggregate(X: SparseBinaryMatrix, cmap: CategoryMap) -> np.ndarray:
    """Per-user app counts per category; shape (n_rows, n_categories)."""
    if len(cmap.category_ids) != X.n_cols:
        raise DataFormatError(
            f"category map covers {len(cmap.category_ids)} apps, matrix has {X.n_cols}"
        )
    out = np.zeros((X.n_rows, cmap.n_categories), dtype=np.float64)
    row_of = np.repeat(np.arange(X.n_rows), np.diff(X.row_offsets))
    np.add.at(out, (row_of, cmap.category_ids[X.col_indices]), 1.0)
    return out


def truncated_svd(
    X,
    k: int,
    seed,
    oversample: int = 10,
    min_power_iters: int = 2,
    max_power_iters: int = 150,
    stabilization_rtol: float = 1e-11,
) -> SvdFactors:
    """Top-k singular triplets of the raw (uncentered) matrix.

    Randomized range finding with Gaussian sketching, then orthonormalized
    power iterations continued until the top-k Ritz values stabilize to
    `stabilization_rtol` relative to the largest one (at least
    `min_power_iters` sweeps). Deterministic given the seed.
    """
    n_rows, n_cols = (X.n_rows, X.n_cols) if isinstance(X, SparseBinaryMatrix) else X.shape
    if not 1 <= k <= min(n_rows, n_cols):
        raise DataFormatError(
            f"k must be in [1, {min(n_rows, n_cols)}] for a {n_rows}x{n_cols} matrix"
        )

    def mm(B):
        return X.matmat(B) if isinstance(X, SparseBinaryMatrix) else np.asarray(X) @ B

    def rmm(U):
        return (
            X.transpose_matmat(U)
            if isinstance(X, SparseBinaryMatrix)
            else np.asarray(X).T @ U
        )

    rng = np.random.default_rng(_seedseq(seed))
    p = min(k + oversample, min(n_rows, n_cols))
    omega = rng.standard_normal((n_cols, p))
    Q, _ = np.linalg.qr(mm(omega))
    prev = None
    for sweep in range(1, max_power_iters + 1):
        Z, _ = np.linalg.qr(rmm(Q))
        Q, R = np.linalg.qr(mm(Z))
        svals = np.linalg.svd(R, compute_uv=False)
        if prev is not None and sweep >= min_power_iters:
            scale = max(float(svals[0]), 1e-300)
            if np.max(np.abs(svals[:k] - prev[:k])) <= stabilization_rtol * scale:
                break
        prev = svals
    B = rmm(Q).T
    _, s, Vt = np.linalg.svd(B, full_matrices=False)
    if not np.all(np.isfinite(s)):
        raise NumericalError("SVD produced non-finite singular values")
    return SvdFactors(k=k, singular_values=s[:k], right_vectors=Vt[:k])


def project(factors: SvdFactors, X) -> np.ndarray:
    """Dense feature matrix X @ V^T of shape (n_rows, k)."""
    n_cols = X.n_cols if isinstance(X, SparseBinaryMatrix) else X.shape[1]
    if factors.right_vectors.shape[1] != n_cols:
        raise DataFormatError(
            f"factors cover {factors.right_vectors.shape[1]} columns, matrix has {n_cols}"
        )
    Vt = np.ascontiguousarray(factors.right_vectors.T)
    if isinstance(X, SparseBinaryMatrix):
        return X.matmat(Vt)
    return np.asarray(X, dtype=np.float64) @ Vt
