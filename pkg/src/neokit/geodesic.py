"""Heat-method geodesic distances on triangle meshes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .laplacian import TriangleMesh, build_cotan_laplacian, cotangent_weights, mesh_edge_lengths
from .poisson import SolveReport, deflated_icpcg_solve, icpcg_solve

# Poisson matrix is L + POISSON_SHIFT * mean(diag(L)/w) * M
POISSON_SHIFT = 1e-8


class DisconnectedMeshError(ValueError):
    pass


@dataclass
class GeodesicResult:
    distances: np.ndarray
    heat: SolveReport
    poisson: SolveReport
    t: float


def poisson_system(L: sp.csr_matrix, mass: np.ndarray) -> sp.csr_matrix:
    """The SPD matrix used for the Poisson step: L plus a tiny mass shift.

    The shift removes the constant nullspace so IC(0) and the coarse matrix
    stay nonsingular; with a mean-free right-hand side it perturbs the
    solution by a relative O(1e-8).
    """
    eps = POISSON_SHIFT * float(np.mean(L.diagonal() / mass))
    return (L + sp.diags(eps * mass)).tocsr()


def _face_gradients(P: np.ndarray, F: np.ndarray, u: np.ndarray):
    p0, p1, p2 = P[F[:, 0]], P[F[:, 1]], P[F[:, 2]]
    n = np.cross(p1 - p0, p2 - p0)
    area2 = np.linalg.norm(n, axis=1)
    n_hat = n / area2[:, None]
    # grad u = sum_i u_i (N x e_i) / (2A), e_i the edge opposite corner i
    g = (u[F[:, 0], None] * np.cross(n_hat, p2 - p1)
         + u[F[:, 1], None] * np.cross(n_hat, p0 - p2)
         + u[F[:, 2], None] * np.cross(n_hat, p1 - p0))
    return g / area2[:, None]


def _integrated_divergence(P: np.ndarray, F: np.ndarray, X: np.ndarray) -> np.ndarray:
    cots = cotangent_weights(P, F)
    div = np.zeros(len(P))
    for c in range(3):
        i, j, k = F[:, c], F[:, (c + 1) % 3], F[:, (c + 2) % 3]
        e1, e2 = P[j] - P[i], P[k] - P[i]
        # cot of the angle at k weights e1, cot of the angle at j weights e2
        contrib = 0.5 * (cots[:, (c + 2) % 3] * (e1 * X).sum(axis=1)
                         + cots[:, (c + 1) % 3] * (e2 * X).sum(axis=1))
        np.add.at(div, i, contrib)
    return div


def heat_geodesic(mesh: TriangleMesh, sources, t_factor: float = 1.0, solver: str = "icpcg",
                  Y: np.ndarray | None = None, tol: float = 1e-8, max_iter: int = 20000) -> GeodesicResult:
    """Distances from ``sources`` via heat flow, gradient normalization and a Poisson solve."""
    sources = np.atleast_1d(np.asarray(sources, dtype=np.int64))
    ops = build_cotan_laplacian(mesh)
    if ops.n_components > 1:
        from scipy.sparse.csgraph import connected_components
        _, labels = connected_components(ops.L, directed=False)
        reach = set(labels[sources].tolist())
        lost = sorted(set(labels.tolist()) - reach)
        raise DisconnectedMeshError(f"mesh has {ops.n_components} components; unreachable: {lost}")
    if solver not in ("icpcg", "deflated"):
        raise ValueError(f"unknown solver {solver!r}")
    if solver == "deflated" and Y is None:
        raise ValueError("deflated solver needs a basis Y")
    L, w = ops.L, ops.mass
    P, F = mesh.positions, mesh.faces

    h = mesh_edge_lengths(mesh).mean()
    t = t_factor * h * h
    delta = np.zeros(mesh.n)
    delta[sources] = 1.0
    A_heat = (sp.diags(w) + t * L).tocsr()
    heat = icpcg_solve(A_heat, w * delta, tol=min(tol, 1e-10), max_iter=max_iter)
    u = heat.x

    g = _face_gradients(P, F, u)
    norms = np.linalg.norm(g, axis=1)
    X = -g / np.where(norms > 0, norms, 1.0)[:, None]
    div = _integrated_divergence(P, F, X)

    # L is PSD (minus the cotan Laplacian), so L phi = -div
    b = -div
    b = b - w * (b.sum() / w.sum())
    A = poisson_system(L, w)
    if solver == "icpcg":
        rep = icpcg_solve(A, b, tol=tol, max_iter=max_iter)
    else:
        rep = deflated_icpcg_solve(A, b, Y, tol=tol, max_iter=max_iter)
    phi = rep.x - rep.x[sources].min()
    return GeodesicResult(phi, heat, rep, t)
