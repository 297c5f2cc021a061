"""Discrete Laplacian and lumped mass for point clouds and triangle meshes.

Both builders return a PSD ``L`` (constant vector in the nullspace) and a
positive mass vector ``w`` so that the eigenproblem reads L u = lambda diag(w) u.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .numerics import as_sparse_symmetric

log = logging.getLogger(__name__)

DEGENERATE_AREA = 1e-14


@dataclass
class PointCloud:
    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValueError(f"positions must be N x 3, got {self.positions.shape}")
        if self.weights.shape != (self.positions.shape[0],):
            raise ValueError("one weight per point required")
        if not np.isfinite(self.positions).all():
            raise ValueError("non-finite coordinates")
        if not (self.weights > 0).all():
            raise ValueError("point weights must be strictly positive")

    @property
    def n(self) -> int:
        return self.positions.shape[0]


@dataclass
class TriangleMesh:
    positions: np.ndarray
    faces: np.ndarray
    dropped_faces: int = field(default=0)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        n = self.positions.shape[0]
        if faces.size and (faces.min() < 0 or faces.max() >= n):
            raise ValueError("face index out of range")
        areas = face_areas(self.positions, faces)
        keep = areas >= DEGENERATE_AREA
        dropped = int((~keep).sum())
        if dropped:
            log.warning("dropped %d degenerate faces", dropped)
        self.faces = faces[keep]
        self.dropped_faces += dropped

    @property
    def n(self) -> int:
        return self.positions.shape[0]


class Operators(NamedTuple):
    L: sp.csr_matrix
    mass: np.ndarray
    n_components: int = 1
    clamped_edges: int = 0
    nonmanifold_edges: int = 0


def face_areas(positions: np.ndarray, faces: np.ndarray) -> np.ndarray:
    if len(faces) == 0:
        return np.zeros(0)
    p0, p1, p2 = positions[faces[:, 0]], positions[faces[:, 1]], positions[faces[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=1)


def normalize_cloud(points: np.ndarray) -> np.ndarray:
    """Center the bounding box and scale uniformly so the longest side spans [-1, 1]."""
    P = np.asarray(points, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] < 1:
        raise ValueError("need at least one point")
    if not np.isfinite(P).all():
        raise ValueError("non-finite coordinates")
    lo, hi = P.min(axis=0), P.max(axis=0)
    half = 0.5 * (hi - lo).max()
    if half == 0.0:
        raise ValueError("all points coincide; zero diameter")
    out = (P - 0.5 * (lo + hi)) / half
    return np.clip(out, -1.0, 1.0)


def _assemble(rows, cols, vals, n) -> sp.csr_matrix:
    """Symmetric Laplacian from off-diagonal weights (both triangles given)."""
    W = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    W.sum_duplicates()
    deg = np.asarray(W.sum(axis=1)).ravel()
    L = sp.diags(deg, format="csr") - W
    return as_sparse_symmetric(L)


def build_knn_laplacian(cloud, k_neighbors: int = 12, bandwidth: float | str = "auto") -> Operators:
    """Gaussian-weighted k-NN graph Laplacian with disk-area masses.

    Edges are the union of the directed k-NN relations with weight
    exp(-d^2 / (4 t)); ``bandwidth="auto"`` sets t to the squared mean
    k-NN distance.  Mass is pi times the squared mean neighbour distance.
    ``cloud`` may be a PointCloud or a raw N x 3 array; any weights it
    carries are ignored since the builder estimates its own masses.
    """
    X = cloud.positions if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    N = X.shape[0]
    if not (N > k_neighbors >= 3):
        raise ValueError(f"need N > k_neighbors >= 3, got N={N}, k={k_neighbors}")
    tree = cKDTree(X)
    dist, idx = tree.query(X, k=k_neighbors + 1)
    # drop the query point itself; with duplicates it may not sit in column 0
    self_hit = idx == np.arange(N)[:, None]
    no_self = ~self_hit.any(axis=1)
    self_hit[no_self, -1] = True
    keep = ~self_hit
    nbr = idx[keep].reshape(N, k_neighbors)
    d = dist[keep].reshape(N, k_neighbors)
    order = np.argsort(nbr, axis=1, kind="stable")
    nbr = np.take_along_axis(nbr, order, axis=1)
    d = np.take_along_axis(d, order, axis=1)

    mean_d = d.mean(axis=1)
    if (mean_d <= 0).any():
        raise ValueError("points with all k neighbours coincident; mass estimate is zero")
    t = float(np.mean(d) ** 2) if bandwidth == "auto" else float(bandwidth)
    if t <= 0:
        raise ValueError("bandwidth must be positive")

    rows = np.repeat(np.arange(N), k_neighbors)
    cols = nbr.ravel()
    wts = np.exp(-(d.ravel() ** 2) / (4.0 * t))
    # union symmetrization: keep one copy of each undirected edge
    W = sp.csr_matrix((wts, (rows, cols)), shape=(N, N))
    W = W.maximum(W.T).tocoo()
    L = _assemble(W.row, W.col, W.data, N)
    mass = np.pi * mean_d ** 2
    n_comp = connected_components(W, directed=False)[0]
    if n_comp > 1:
        log.info("k-NN graph has %d connected components", n_comp)
    return Operators(L, mass, int(n_comp))


def cotangent_weights(positions: np.ndarray, faces: np.ndarray):
    """Per-face cotangents of the angles at each corner (F x 3)."""
    P = positions
    cots = np.empty((len(faces), 3))
    for c in range(3):
        i, j, k = faces[:, c], faces[:, (c + 1) % 3], faces[:, (c + 2) % 3]
        e1, e2 = P[j] - P[i], P[k] - P[i]
        cross = np.linalg.norm(np.cross(e1, e2), axis=1)
        cots[:, c] = (e1 * e2).sum(axis=1) / cross
    return cots


def build_cotan_laplacian(mesh: TriangleMesh, clamp_negative: bool = False) -> Operators:
    """Cotangent stiffness matrix with barycentric lumped mass.

    The assembled matrix is a sum of per-triangle PSD element matrices, so it
    stays PSD for any set of non-degenerate faces even when individual edge
    weights are negative.  ``clamp_negative=True`` floors negative edge
    weights at zero (M-matrix form) and reports how many were clamped.
    """
    F = mesh.faces
    if mesh.n == 0 or len(F) == 0:
        raise ValueError("empty mesh or no valid faces")
    N = mesh.n
    cots = cotangent_weights(mesh.positions, F)
    rows, cols, vals = [], [], []
    for c in range(3):
        # the angle at corner c is opposite edge (c+1, c+2)
        j, k = F[:, (c + 1) % 3], F[:, (c + 2) % 3]
        rows += [j, k]
        cols += [k, j]
        vals += [0.5 * cots[:, c]] * 2
    rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    W = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    W.sum_duplicates()
    clamped = 0
    if clamp_negative:
        neg = W.data < 0
        clamped = int(neg.sum()) // 2
        W.data[neg] = 0.0
    W = W.tocoo()
    L = _assemble(W.row, W.col, W.data, N)

    areas = face_areas(mesh.positions, F)
    mass = np.zeros(N)
    for c in range(3):
        np.add.at(mass, F[:, c], areas / 3.0)
    if (mass <= 0).any():
        raise ValueError(f"{int((mass <= 0).sum())} vertices touch no valid face")

    edges = np.sort(np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]]), axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    nonmanifold = int((counts > 2).sum())
    pattern = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(N, N))
    n_comp = connected_components(pattern, directed=False)[0]
    return Operators(L, mass, int(n_comp), clamped, nonmanifold)


def mesh_edge_lengths(mesh: TriangleMesh) -> np.ndarray:
    F = mesh.faces
    edges = np.unique(np.sort(np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]]), axis=1), axis=0)
    return np.linalg.norm(mesh.positions[edges[:, 0]] - mesh.positions[edges[:, 1]], axis=1)
