"""Incomplete-Cholesky PCG and its spectrally deflated two-level variant."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

MAX_SHIFT_RESTARTS = 30
# pivots below this fraction of the original diagonal count as breakdown
PIVOT_RTOL = 1e-12
COARSE_COND_LIMIT = 1e12


class FactorizationError(RuntimeError):
    pass


class SingularCoarseError(RuntimeError):
    pass


@dataclass
class ICFactor:
    """Zero-fill lower factor (CSR, diagonal last in each row) of A + shift*I."""

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    shift: float = 0.0
    restarts: int = 0

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    def to_sparse(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(self.n, self.n))

    def solve(self, r: np.ndarray) -> np.ndarray:
        """(L L^T)^-1 r."""
        return _ic_apply(self.indptr, self.indices, self.data, np.ascontiguousarray(r, dtype=np.float64))


@dataclass
class SolveReport:
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool
    history: list[float] = field(default_factory=list)

    def history_csv(self) -> str:
        return "iter,residual\n" + "".join(f"{i},{float(r)!r}\n" for i, r in enumerate(self.history))


@numba.njit(cache=True)
def _ic0_kernel(indptr, indices, data, shift, pivot_floor):
    """Row-oriented IC(0) on the lower-triangular pattern.

    Returns the factor values and the first failing row (-1 on success).
    """
    n = len(indptr) - 1
    out = np.zeros_like(data)
    for i in range(n):
        start, end = indptr[i], indptr[i + 1]
        for p in range(start, end):
            j = indices[p]
            # dot product of rows i and j over columns < j
            s = 0.0
            a, b = start, indptr[j]
            bend = indptr[j + 1] - 1
            while a < p and b < bend:
                ca, cb = indices[a], indices[b]
                if ca == cb:
                    s += out[a] * out[b]
                    a += 1
                    b += 1
                elif ca < cb:
                    a += 1
                else:
                    b += 1
            if j < i:
                out[p] = (data[p] - s) / out[indptr[j + 1] - 1]
            else:
                piv = data[p] + shift - s
                if piv <= pivot_floor[i]:
                    return out, i
                out[p] = np.sqrt(piv)
    return out, -1


@numba.njit(cache=True)
def _ic_apply(indptr, indices, data, r):
    n = len(indptr) - 1
    y = r.copy()
    for i in range(n):
        s = y[i]
        end = indptr[i + 1] - 1
        for p in range(indptr[i], end):
            s -= data[p] * y[indices[p]]
        y[i] = s / data[end]
    for i in range(n - 1, -1, -1):
        end = indptr[i + 1] - 1
        y[i] /= data[end]
        yi = y[i]
        for p in range(indptr[i], end):
            y[indices[p]] -= data[p] * yi
    return y


def ic0_factor(A) -> ICFactor:
    """Zero-fill incomplete Cholesky with diagonal-shift restarts on breakdown."""
    A = sp.csr_matrix(A, dtype=np.float64)
    low = sp.tril(A, format="csr")
    low.sort_indices()
    n = A.shape[0]
    diag = A.diagonal()
    if (diag <= 0).any():
        raise FactorizationError("IC(0) needs a positive diagonal")
    counts = np.diff(low.indptr)
    last = low.indices[low.indptr[1:] - 1] if n else np.zeros(0, dtype=low.indices.dtype)
    if (counts == 0).any() or (last != np.arange(n)).any():
        raise FactorizationError("diagonal entry missing from the sparsity pattern")
    indptr = low.indptr.astype(np.int64)
    indices = low.indices.astype(np.int64)
    floor = PIVOT_RTOL * diag
    shift = 0.0
    beta = 1e-8 * diag.mean()
    for attempt in range(MAX_SHIFT_RESTARTS + 1):
        vals, bad = _ic0_kernel(indptr, indices, low.data, shift, floor)
        if bad < 0:
            if attempt:
                log.info("IC(0) succeeded after %d restarts, shift %.3e", attempt, shift)
            return ICFactor(indptr, indices, vals, shift, attempt)
        shift = beta
        beta *= 2.0
    raise FactorizationError(f"IC(0) broke down after {MAX_SHIFT_RESTARTS} shift restarts")


def _pcg(A, b, precond, x0, tol, max_iter) -> SolveReport:
    bnorm = np.linalg.norm(b)
    eps = tol * bnorm
    x = x0
    r = b - A @ x
    rnorm = np.linalg.norm(r)
    history = [rnorm]
    if bnorm == 0.0 or rnorm < eps:
        return SolveReport(x, 0, rnorm, True, history)
    z = precond(r)
    p = z.copy()
    rz = r @ z
    it = 0
    converged = False
    while it < max_iter:
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x = x + alpha * p
        r = r - alpha * Ap
        it += 1
        rnorm = np.linalg.norm(r)
        history.append(rnorm)
        if rnorm < eps:
            converged = True
            break
        z = precond(r)
        rz_new = r @ z
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p
    return SolveReport(x, it, rnorm, converged, history)


def icpcg_solve(A, b, tol: float = 1e-8, max_iter: int = 10000, factor: ICFactor | None = None) -> SolveReport:
    """Conjugate gradient preconditioned by IC(0); stops when ||r|| < tol*||b||."""
    A = sp.csr_matrix(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (A.shape[0],):
        raise ValueError(f"rhs has shape {b.shape}, operator is {A.shape}")
    factor = factor or ic0_factor(A)
    return _pcg(A, b, factor.solve, np.zeros_like(b), tol, max_iter)


@dataclass
class DeflationSpace:
    Y: np.ndarray
    E: np.ndarray
    E_inv: np.ndarray

    @classmethod
    def build(cls, A, Y: np.ndarray) -> "DeflationSpace":
        Y = np.asarray(Y, dtype=np.float64)
        if Y.ndim != 2 or Y.shape[0] != A.shape[0]:
            raise ValueError(f"basis has shape {Y.shape}, operator is {A.shape}")
        E = Y.T @ (A @ Y)
        E = 0.5 * (E + E.T)
        if E.size and np.linalg.cond(E) > COARSE_COND_LIMIT:
            raise SingularCoarseError("coarse matrix Y^T A Y is singular (condition > 1e12)")
        E_inv = np.linalg.inv(E) if E.size else np.zeros((0, 0))
        return cls(Y, E, E_inv)

    def coarse(self, v: np.ndarray) -> np.ndarray:
        return self.Y @ (self.E_inv @ (self.Y.T @ v))


def deflated_icpcg_solve(A, b, Y, tol: float = 1e-8, max_iter: int = 10000,
                         factor: ICFactor | None = None) -> SolveReport:
    """PCG with the additive two-level preconditioner IC(0)^-1 + Y E^-1 Y^T.

    Starts from the coarse solution x0 = Y E^-1 Y^T b.  An empty Y reproduces
    :func:`icpcg_solve` iterate for iterate.
    """
    A = sp.csr_matrix(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (A.shape[0],):
        raise ValueError(f"rhs has shape {b.shape}, operator is {A.shape}")
    space = DeflationSpace.build(A, np.asarray(Y).reshape(A.shape[0], -1))
    factor = factor or ic0_factor(A)

    def precond(r):
        return factor.solve(r) + space.coarse(r)

    return _pcg(A, b, precond, space.coarse(b), tol, max_iter)
