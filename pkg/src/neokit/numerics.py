"""Dense and sparse kernels shared by the rest of the package.

Sparse operators are plain ``scipy.sparse.csr_matrix`` objects holding the
full symmetric pattern (both triangles) with every diagonal entry stored.
Everything is float64.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

SYMMETRY_RTOL = 1e-12
RANK_RTOL = 1e-10


class DimensionError(ValueError):
    pass


class NotSymmetricError(ValueError):
    pass


def as_sparse_symmetric(A, check: bool = True, rtol: float = SYMMETRY_RTOL) -> sp.csr_matrix:
    """Return ``A`` as a canonical CSR matrix with an explicit diagonal.

    Duplicates are summed, column indices sorted, and missing diagonal
    entries are inserted as explicit zeros.
    """
    A = sp.csr_matrix(A, dtype=np.float64)
    n, n2 = A.shape
    if n != n2:
        raise DimensionError(f"operator must be square, got {A.shape}")
    A.sum_duplicates()
    coo = A.tocoo()
    present = np.zeros(n, dtype=bool)
    present[coo.row[coo.row == coo.col]] = True
    if not present.all():
        A = _with_explicit_diagonal(A, A.diagonal())
    A.sort_indices()
    if check and not is_symmetric(A, rtol):
        raise NotSymmetricError("sparse operator is not symmetric")
    return A


def _with_explicit_diagonal(A: sp.csr_matrix, diag: np.ndarray) -> sp.csr_matrix:
    coo = A.tocoo()
    off = coo.row != coo.col
    n = A.shape[0]
    rows = np.concatenate([coo.row[off], np.arange(n)])
    cols = np.concatenate([coo.col[off], np.arange(n)])
    vals = np.concatenate([coo.data[off], diag])
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    indptr = np.cumsum(indptr)
    return sp.csr_matrix((vals, cols, indptr), shape=(n, n))


def is_symmetric(A, rtol: float = SYMMETRY_RTOL) -> bool:
    A = sp.csr_matrix(A)
    scale = abs(A).max() if A.nnz else 0.0
    if scale == 0.0:
        return True
    diff = A - A.T
    return (abs(diff).max() if diff.nnz else 0.0) <= rtol * scale


def spmv(A: sp.csr_matrix, x: np.ndarray) -> np.ndarray:
    """y = A x for a CSR operator; x may also be an N x m block."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != A.shape[1]:
        raise DimensionError(f"operator has {A.shape[1]} columns, vector has {x.shape[0]} rows")
    return A @ x


def thin_qr(Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Householder thin QR with a nonnegative diagonal in R.

    Returns Q (N x m) with orthonormal columns and upper-triangular R (m x m).
    """
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2:
        raise DimensionError("thin_qr expects a 2-D array")
    N, m = Z.shape
    if N < m:
        raise DimensionError(f"thin_qr needs rows >= cols, got {Z.shape}")
    Q, R = np.linalg.qr(Z, mode="reduced")
    signs = np.where(np.diag(R) < 0.0, -1.0, 1.0)
    return Q * signs, R * signs[:, None]


def deficient_columns(R: np.ndarray, Z: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Indices j with |R_jj| below ``rtol`` times the norm of column j of Z."""
    col_norms = np.linalg.norm(Z, axis=0)
    d = np.abs(np.diag(R))
    return np.flatnonzero(d < rtol * col_norms)


def dense_sym_eig(A: np.ndarray, rtol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a dense symmetric matrix, values ascending."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got {A.shape}")
    if A.size == 0:
        return np.zeros(0), np.zeros((0, 0))
    scale = np.abs(A).max()
    if np.abs(A - A.T).max() > rtol * max(scale, np.finfo(float).tiny):
        raise NotSymmetricError("dense_sym_eig requires a symmetric matrix")
    values, vectors = np.linalg.eigh(0.5 * (A + A.T))
    return values, vectors
