"""Rayleigh-Ritz recovery of eigenpairs from a redundant set of fields.

Pipeline: raw fields F (N x m) -> M-orthonormal basis Y -> projected
operator Y^T L Y -> small dense eigenproblem -> lifted Ritz vectors.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .numerics import RANK_RTOL, deficient_columns, dense_sym_eig, thin_qr

log = logging.getLogger(__name__)


@dataclass
class WeightedBasis:
    Y: np.ndarray
    dropped: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def rank_deficient(self) -> bool:
        return self.dropped.size > 0


@dataclass
class RitzResult:
    values: np.ndarray
    vectors: np.ndarray
    basis: np.ndarray
    residuals: np.ndarray
    dropped: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    timings: list[tuple[str, float]] = field(default_factory=list)

    @property
    def subspace_dim(self) -> int:
        return self.basis.shape[1]

    @property
    def k(self) -> int:
        return len(self.values)

    def timings_csv(self, header: bool = True) -> str:
        N, m = self.basis.shape
        rows = ["stage,name,N,m,seconds\n"] if header else []
        rows += [f"{i},{name},{N},{m},{float(sec)!r}\n" for i, (name, sec) in enumerate(self.timings)]
        return "".join(rows)


def weighted_orthonormalize(F: np.ndarray, mass: np.ndarray, rtol: float = RANK_RTOL) -> WeightedBasis:
    """M-orthonormal basis of span(F) via Z = sqrt(M) F, Z = QR, Y = M^-1/2 Q.

    Columns that are numerically dependent on earlier ones (|R_jj| below
    ``rtol`` of the column norm) are dropped and the QR is redone on the rest.
    """
    F = np.asarray(F, dtype=np.float64)
    mass = np.asarray(mass, dtype=np.float64)
    N, m = F.shape
    if N < m:
        raise ValueError(f"need n_points >= n_fields, got {F.shape}")
    if mass.shape != (N,) or not (mass > 0).all():
        raise ValueError("mass must be a positive vector of length N")
    sq = np.sqrt(mass)
    Z = sq[:, None] * F
    cols = np.arange(m)
    dropped: list[int] = []
    while True:
        Q, R = thin_qr(Z[:, cols])
        bad = deficient_columns(R, Z[:, cols], rtol)
        if bad.size == 0:
            break
        dropped.append(int(cols[bad[0]]))
        cols = np.delete(cols, bad[0])
    if dropped:
        log.debug("rank-deficient fields: dropped %d of %d columns", len(dropped), m)
    return WeightedBasis(Q / sq[:, None], np.asarray(dropped, dtype=np.int64))


def rayleigh_ritz(Y: np.ndarray, L, mass: np.ndarray, k: int) -> RitzResult:
    """k smallest Ritz pairs of (L, M) in span(Y); Y must be M-orthonormal."""
    m = Y.shape[1]
    if k > m:
        raise ValueError(f"k={k} exceeds the subspace dimension {m}")
    timings = []
    t0 = time.perf_counter()
    LY = L @ Y
    L_hat = Y.T @ LY
    L_hat = 0.5 * (L_hat + L_hat.T)
    timings.append(("project", time.perf_counter() - t0))
    t0 = time.perf_counter()
    theta, V = dense_sym_eig(L_hat)
    order = np.argsort(theta, kind="stable")[:k]
    theta, V = theta[order], V[:, order]
    timings.append(("dense_eig", time.perf_counter() - t0))
    t0 = time.perf_counter()
    U = Y @ V
    timings.append(("lift", time.perf_counter() - t0))
    R = LY @ V - (mass[:, None] * U) * theta[None, :]
    residuals = np.sqrt(((R * R) / mass[:, None]).sum(axis=0))
    return RitzResult(theta, U, Y, residuals, timings=timings)


def recover_eigenpairs(F: np.ndarray, L, mass: np.ndarray, k: int) -> RitzResult:
    """Orthonormalize raw fields, then Rayleigh-Ritz; stage timings recorded."""
    t0 = time.perf_counter()
    wb = weighted_orthonormalize(F, mass)
    t_qr = time.perf_counter() - t0
    if wb.rank_deficient:
        log.warning("rank-deficient fields: dropped %d of %d columns", wb.dropped.size, F.shape[1])
    res = rayleigh_ritz(wb.Y, L, mass, k)
    res.dropped = wb.dropped
    res.timings.insert(0, ("orthonormalize", t_qr))
    return res
