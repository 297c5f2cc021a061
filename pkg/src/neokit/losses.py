"""Span and orthogonality losses, their gradient, and spectral error metrics.

All inner products are in the mass metric <u, v>_M = u^T diag(w) v.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .eigensolvers import Spectrum
from .subspace import RitzResult, weighted_orthonormalize

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 1e-3
GRAM_COND_LIMIT = 1e12


class NotOrthonormalError(ValueError):
    pass


class IllConditionedError(ValueError):
    pass


@dataclass
class LossReport:
    span_loss: float
    ortho_loss: float
    total: float
    alpha: float
    per_mode_residuals: np.ndarray

    @property
    def span_loss_clamped(self) -> float:
        return float(np.clip(self.span_loss, 0.0, 1.0))


def check_m_orthonormal(U: np.ndarray, mass: np.ndarray, tol: float = 1e-6) -> None:
    G = U.T @ (mass[:, None] * U)
    err = np.abs(G - np.eye(U.shape[1])).max() if G.size else 0.0
    if err > tol:
        raise NotOrthonormalError(f"target basis is not M-orthonormal (max deviation {err:.2e})")


def _span_residuals(F, mass, U, basis, method):
    MU = mass[:, None] * U
    if basis == "orthonormal":
        S = F.T @ MU
        return 1.0 - (S * S).sum(axis=0)
    if method == "qr":
        Y = weighted_orthonormalize(F, mass).Y
        S = Y.T @ MU
        return 1.0 - (S * S).sum(axis=0)
    if method == "gram":
        G = F.T @ (mass[:, None] * F)
        S = F.T @ MU
        return 1.0 - (S * np.linalg.solve(G, S)).sum(axis=0)
    raise ValueError(f"unknown method {method!r}")


def span_loss(F: np.ndarray, mass: np.ndarray, U: np.ndarray, basis: str = "raw",
              method: str = "qr") -> LossReport:
    """Mean residual energy of the target modes U outside span(F).

    ``basis="orthonormal"`` takes F as an already M-orthonormal Y.  For raw
    fields ``method`` picks the QR route or the Gram-projector route
    F (F^T M F)^-1 F^T M; both agree for full-rank F.
    """
    F = np.asarray(F, dtype=np.float64)
    mass = np.asarray(mass, dtype=np.float64)
    check_m_orthonormal(U, mass)
    r = _span_residuals(F, mass, U, basis, method)
    value = float(r.mean())
    return LossReport(value, 0.0, value, 0.0, r)


def ortho_loss(F: np.ndarray, mass: np.ndarray) -> float:
    G = F.T @ (mass[:, None] * F)
    D = G - np.eye(G.shape[0])
    return float((D * D).sum())


def loss_value(F, mass, U, alpha: float = DEFAULT_ALPHA, method: str = "qr") -> LossReport:
    rep = span_loss(F, mass, U, method=method)
    o = ortho_loss(F, mass)
    return LossReport(rep.span_loss, o, rep.span_loss + alpha * o, alpha, rep.per_mode_residuals)


def loss_gradient(F: np.ndarray, mass: np.ndarray, U: np.ndarray,
                  alpha: float = DEFAULT_ALPHA) -> tuple[np.ndarray, LossReport]:
    """Value and gradient w.r.t. F of span_loss + alpha * ortho_loss (Gram route).

    With G = F^T M F, S = F^T M U and C = M U:
      d span  = -(2/k) [C S^T G^-1 - M F G^-1 S S^T G^-1]
      d ortho = 4 M F (G - I)
    """
    F = np.asarray(F, dtype=np.float64)
    mass = np.asarray(mass, dtype=np.float64)
    check_m_orthonormal(U, mass)
    k = U.shape[1]
    MF = mass[:, None] * F
    C = mass[:, None] * U
    G = F.T @ MF
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > GRAM_COND_LIMIT:
        raise IllConditionedError(f"Gram matrix condition number {cond:.2e} exceeds {GRAM_COND_LIMIT:.0e}")
    S = F.T @ C
    GiS = np.linalg.solve(G, S)
    r = 1.0 - (S * GiS).sum(axis=0)
    span = float(r.mean())
    D = G - np.eye(G.shape[0])
    ortho = float((D * D).sum())
    grad_span = -(2.0 / k) * (C @ GiS.T - MF @ (GiS @ GiS.T))
    grad = grad_span + alpha * 4.0 * (MF @ D)
    return grad, LossReport(span, ortho, span + alpha * ortho, alpha, r)


@dataclass
class MetricReport:
    span_per_mode: np.ndarray
    evec_mse_per_mode: np.ndarray
    eval_rel_err: float
    excluded_modes: list[int] = field(default_factory=list)

    @property
    def means(self) -> dict:
        return {
            "span": float(np.mean(self.span_per_mode)),
            "evec": float(np.mean(self.evec_mse_per_mode)),
            "eval": float(self.eval_rel_err),
        }

    def to_dict(self) -> dict:
        return {
            "span_per_mode": [float(v) for v in self.span_per_mode],
            "evec_mse_per_mode": [float(v) for v in self.evec_mse_per_mode],
            "eval_rel_err": float(self.eval_rel_err),
            "means": self.means,
            "excluded_modes": list(self.excluded_modes),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def align_modes(predicted: RitzResult, truth: Spectrum, mass: np.ndarray) -> RitzResult:
    """Greedy eigenvalue matching, then flip signs so u_i^T M u_hat_i >= 0."""
    if predicted.k != truth.k:
        raise ValueError(f"mode count mismatch: predicted {predicted.k}, truth {truth.k}")
    free = np.ones(predicted.k, dtype=bool)
    perm = np.empty(truth.k, dtype=np.int64)
    for i, lam in enumerate(truth.values):
        cost = np.where(free, np.abs(predicted.values - lam), np.inf)
        j = int(np.argmin(cost))
        perm[i] = j
        free[j] = False
    vecs = predicted.vectors[:, perm]
    dots = (truth.vectors * (mass[:, None] * vecs)).sum(axis=0)
    signs = np.where(dots < 0, -1.0, 1.0)
    return replace(predicted, values=predicted.values[perm], vectors=vecs * signs,
                   residuals=predicted.residuals[perm])


def evaluate(predicted: RitzResult, truth: Spectrum, mass: np.ndarray, zero_tol: float = 1e-10) -> MetricReport:
    """Per-mode span residual and eigenvector error, mean relative eigenvalue error.

    The first mode is excluded from the eigenvalue error, as is any later
    truth mode whose eigenvalue is numerically zero (disconnected input).
    """
    mass = np.asarray(mass, dtype=np.float64)
    aligned = align_modes(predicted, truth, mass)
    U = truth.vectors
    S = predicted.basis.T @ (mass[:, None] * U)
    span = 1.0 - (S * S).sum(axis=0)
    D = U - aligned.vectors
    evec = (mass[:, None] * D * D).sum(axis=0)
    lam = truth.values
    scale = max(abs(lam).max(), 1.0)
    excluded = [i for i in range(1, truth.k) if abs(lam[i]) <= zero_tol * scale]
    if excluded:
        log.warning("excluded %d zero-eigenvalue modes from eigenvalue error", len(excluded))
    idx = [i for i in range(1, truth.k) if i not in excluded]
    rel = np.abs(lam[idx] - aligned.values[idx]) / np.abs(lam[idx])
    e_val = float(rel.mean()) if len(idx) else 0.0
    return MetricReport(span, evec, e_val, excluded)
