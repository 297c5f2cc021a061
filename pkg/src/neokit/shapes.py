"""Synthetic meshes and point clouds used by tests, demos and benchmarks."""
from __future__ import annotations

import numpy as np


def icosphere(level: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit icosphere; level 0 is the icosahedron (12 vertices)."""
    t = (1.0 + 5.0 ** 0.5) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    V = np.asarray(verts, dtype=np.float64)
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    F = np.asarray(faces, dtype=np.int64)
    for _ in range(level):
        V, F = _subdivide(V, F)
    return V, F


def _subdivide(V: np.ndarray, F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    edges = np.sort(np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]]), axis=1)
    uniq, inverse = np.unique(edges, axis=0, return_inverse=True)
    inverse = inverse.reshape(3, -1)
    mid = V[uniq[:, 0]] + V[uniq[:, 1]]
    mid /= np.linalg.norm(mid, axis=1, keepdims=True)
    n = V.shape[0]
    a, b, c = (inverse[0] + n, inverse[1] + n, inverse[2] + n)
    i, j, k = F[:, 0], F[:, 1], F[:, 2]
    F_new = np.concatenate([
        np.stack([i, a, c], 1), np.stack([j, b, a], 1),
        np.stack([k, c, b], 1), np.stack([a, b, c], 1),
    ])
    return np.vstack([V, mid]), F_new


def grid_mesh(nx: int, ny: int, width: float = 1.0, height: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Flat rectangle in the z=0 plane split into right triangles."""
    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    V = np.stack([X.ravel(), Y.ravel(), np.zeros(X.size)], axis=1)
    idx = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    v00, v10 = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    v01, v11 = idx[:-1, 1:].ravel(), idx[1:, 1:].ravel()
    F = np.concatenate([np.stack([v00, v10, v11], 1), np.stack([v00, v11, v01], 1)])
    return V, F


def torus_mesh(n_major: int, n_minor: int, R: float = 1.0, r: float = 0.4) -> tuple[np.ndarray, np.ndarray]:
    u = 2 * np.pi * np.arange(n_major) / n_major
    v = 2 * np.pi * np.arange(n_minor) / n_minor
    U, W = np.meshgrid(u, v, indexing="ij")
    V = np.stack([
        (R + r * np.cos(W)) * np.cos(U),
        (R + r * np.cos(W)) * np.sin(U),
        r * np.sin(W),
    ], axis=-1).reshape(-1, 3)
    idx = np.arange(n_major * n_minor).reshape(n_major, n_minor)
    a = idx
    b = np.roll(idx, -1, axis=0)
    c = np.roll(np.roll(idx, -1, axis=0), -1, axis=1)
    d = np.roll(idx, -1, axis=1)
    F = np.concatenate([
        np.stack([a.ravel(), b.ravel(), c.ravel()], 1),
        np.stack([a.ravel(), c.ravel(), d.ravel()], 1),
    ])
    return V, F


def cube_sphere(n: int, radii=(1.0, 1.0, 1.0)) -> tuple[np.ndarray, np.ndarray]:
    """Cube with n x n quads per side projected onto an ellipsoid."""
    lin = np.linspace(-1.0, 1.0, n + 1)
    A, B = np.meshgrid(lin, lin, indexing="ij")
    one = np.ones_like(A)
    sides = [
        (one, A, B), (-one, B, A), (A, one, B), (B, -one, A), (A, B, one), (B, A, -one),
    ]
    pts, faces = [], []
    offset = 0
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    q00, q10 = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    q01, q11 = idx[:-1, 1:].ravel(), idx[1:, 1:].ravel()
    for x, y, z in sides:
        pts.append(np.stack([x.ravel(), y.ravel(), z.ravel()], 1))
        faces.append(np.concatenate([
            np.stack([q00, q10, q11], 1), np.stack([q00, q11, q01], 1),
        ]) + offset)
        offset += (n + 1) ** 2
    P = np.vstack(pts)
    F = np.vstack(faces)
    # weld the shared cube edges
    key = np.round(P * (4 * n)).astype(np.int64)
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    P = P[first]
    F = inverse.ravel()[F]
    P = P / np.linalg.norm(P, axis=1, keepdims=True)
    P = P * np.asarray(radii, dtype=np.float64)
    # orient every face outward
    cen = P[F].mean(axis=1)
    nrm = np.cross(P[F[:, 1]] - P[F[:, 0]], P[F[:, 2]] - P[F[:, 0]])
    flip = (nrm * cen).sum(axis=1) < 0
    F[flip] = F[flip][:, [0, 2, 1]]
    return P, F


def sphere_cloud(n: int, seed: int = 0) -> np.ndarray:
    """Uniform random samples of the unit sphere."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 3))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def ellipsoid_cloud(n: int, radii=(1.0, 0.8, 0.6), seed: int = 0) -> np.ndarray:
    return sphere_cloud(n, seed) * np.asarray(radii)


def torus_cloud(n: int, R: float = 1.0, r: float = 0.4, seed: int = 0) -> np.ndarray:
    """Area-uniform samples of a torus via rejection on the minor angle."""
    rng = np.random.default_rng(seed)
    out = []
    while sum(len(o) for o in out) < n:
        u = rng.uniform(0, 2 * np.pi, 2 * n)
        v = rng.uniform(0, 2 * np.pi, 2 * n)
        keep = rng.uniform(0, R + r, 2 * n) < R + r * np.cos(v)
        u, v = u[keep], v[keep]
        out.append(np.stack([(R + r * np.cos(v)) * np.cos(u), (R + r * np.cos(v)) * np.sin(u), r * np.sin(v)], 1))
    return np.vstack(out)[:n]


def great_circle_distance(points: np.ndarray, source: np.ndarray) -> np.ndarray:
    """Arc length on the unit sphere from ``source`` to each point."""
    p = points / np.linalg.norm(points, axis=1, keepdims=True)
    s = source / np.linalg.norm(source)
    return np.arctan2(np.linalg.norm(np.cross(p, s), axis=1), p @ s)
