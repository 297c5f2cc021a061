"""Reference solvers for the generalized problem L u = lambda M u."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

log = logging.getLogger(__name__)

DENSE_LIMIT = 8192


@dataclass
class Spectrum:
    """Ascending eigenvalues with M-orthonormal eigenvectors as columns."""

    values: np.ndarray
    vectors: np.ndarray
    converged: int | None = None
    iterations: int = 0
    residuals: np.ndarray | None = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return len(self.values)


def _check_problem(L, mass, k):
    mass = np.asarray(mass, dtype=np.float64)
    N = L.shape[0]
    if mass.shape != (N,):
        raise ValueError(f"mass has shape {mass.shape}, operator is {N} x {N}")
    if not (mass > 0).all():
        raise ValueError("mass must be strictly positive")
    if not 1 <= k <= N:
        raise ValueError(f"k={k} outside [1, {N}]")
    return mass


def smallest_eigenpairs_dense(L, mass, k: int) -> Spectrum:
    """Exact smallest k pairs via the symmetric reduction M^-1/2 L M^-1/2."""
    mass = _check_problem(L, mass, k)
    N = L.shape[0]
    if N > DENSE_LIMIT:
        raise ValueError(f"dense oracle limited to N <= {DENSE_LIMIT}, got {N}")
    s = 1.0 / np.sqrt(mass)
    A = L.toarray() if sp.issparse(L) else np.array(L, dtype=np.float64)
    A = s[:, None] * A * s[None, :]
    A = 0.5 * (A + A.T)
    if k < N:
        values, V = sla.eigh(A, subset_by_index=[0, k - 1], driver="evr")
    else:
        values, V = sla.eigh(A, driver="evd")
    U = s[:, None] * V
    return Spectrum(values, U, converged=k)


def residual_norms(L, mass, values, vectors, norm: str = "minv") -> np.ndarray:
    """Per-pair ||L u - lambda M u|| in the M^-1 norm ("minv") or 2-norm ("l2")."""
    R = L @ vectors - (mass[:, None] * vectors) * values[None, :]
    if norm == "minv":
        return np.sqrt(((R * R) / mass[:, None]).sum(axis=0))
    return np.linalg.norm(R, axis=0)


def _m_orthonormalize(S: np.ndarray, mass: np.ndarray, drop_tol: float = 1e-10) -> np.ndarray:
    """SVQB: scaled Gram eigendecomposition, dropping near-dependent directions."""
    G = S.T @ (mass[:, None] * S)
    d = np.sqrt(np.clip(np.diag(G), 0.0, None))
    keep = d > 0
    S, G, d = S[:, keep], G[np.ix_(keep, keep)], d[keep]
    G = G / d[:, None] / d[None, :]
    theta, V = np.linalg.eigh(0.5 * (G + G.T))
    good = theta > drop_tol * theta.max()
    return (S / d[None, :]) @ (V[:, good] / np.sqrt(theta[good]))


def _ic_preconditioner(L, mass):
    from .poisson import ic0_factor

    sigma = 1e-6 * float(np.mean(L.diagonal() / mass))
    factor = ic0_factor((L + sp.diags(sigma * mass)).tocsr())
    return lambda R: np.column_stack([factor.solve(R[:, j]) for j in range(R.shape[1])])


def smallest_eigenpairs_lobpcg(L, mass, k: int, tol: float = 1e-8, precond: str = "none",
                               max_iter: int = 1000, seed: int = 0) -> Spectrum:
    """Block LOBPCG for the k smallest pairs of L u = lambda M u.

    Convergence per pair: ||L u - lambda M u||_{M^-1} / (lambda + 1) <= tol.
    The block carries min(k, 32) padding columns.  On non-convergence the
    result holds the current iterate and ``converged`` < k.
    """
    mass = _check_problem(L, mass, k)
    N = L.shape[0]
    if 4 * k > N:
        raise ValueError(f"LOBPCG needs k <= N/4, got k={k}, N={N}")
    L = sp.csr_matrix(L, dtype=np.float64)
    nb = min(k + min(k, 32), N // 2)
    if precond == "ic0":
        T = _ic_preconditioner(L, mass)
    elif precond == "none":
        T = None
    else:
        raise ValueError(f"unknown preconditioner {precond!r}")

    rng = np.random.default_rng(seed)
    X = _m_orthonormalize(rng.standard_normal((N, nb)), mass)
    H = X.T @ (L @ X)
    lam, C = np.linalg.eigh(0.5 * (H + H.T))
    X = X @ C
    P = None
    it = 0
    breakdowns = 0
    while True:
        R = L @ X - (mass[:, None] * X) * lam[None, :]
        res = np.sqrt(((R * R) / mass[:, None]).sum(axis=0)) / (np.abs(lam) + 1.0)
        n_conv = int(np.argmin(np.append(res[:k] <= tol, False)))
        if n_conv >= k or it >= max_iter:
            break
        active = res > tol
        W = R[:, active]
        if T is not None:
            W = T(W)
        blocks = [X, W] if P is None else [X, W, P[:, active]]
        S = np.hstack(blocks)
        try:
            S = _m_orthonormalize(_m_orthonormalize(S, mass), mass)
        except np.linalg.LinAlgError:
            breakdowns += 1
            if breakdowns > 3:
                raise
            log.warning("LOBPCG basis breakdown at iteration %d; restarting directions", it)
            P = None
            S = _m_orthonormalize(np.hstack([X, W]), mass)
        if S.shape[1] < nb:
            breakdowns += 1
            if breakdowns > 3:
                raise np.linalg.LinAlgError("LOBPCG basis repeatedly lost rank")
            P = None
            continue
        LS = L @ S
        A_s = S.T @ LS
        theta, V = np.linalg.eigh(0.5 * (A_s + A_s.T))
        X_new = S @ V[:, :nb]
        lam = theta[:nb]
        # implicit search direction: the part of the update outside the old X
        P = X_new - X @ (X.T @ (mass[:, None] * X_new))
        X = X_new
        it += 1
    n_conv = int(np.argmin(np.append(res[:k] <= tol, False)))
    if n_conv < k:
        log.warning("LOBPCG: %d of %d pairs converged after %d iterations", n_conv, k, it)
    return Spectrum(lam[:k].copy(), X[:, :k].copy(), converged=n_conv, iterations=it, residuals=res[:k].copy())
