"""Readers and writers for XYZ, ASCII PLY (vertices) and OBJ files."""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np


class ParseError(ValueError):
    pass


def read_xyz(path: str | os.PathLike) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 3:
            raise ParseError(f"{path}:{lineno}: expected 'x y z'")
        try:
            rows.append([float(v) for v in parts[:3]])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
    return _points(rows, path)


def read_ply(path: str | os.PathLike) -> np.ndarray:
    lines = Path(path).read_text(errors="replace").splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError(f"{path}: missing 'ply' header")
    n_vertices = None
    props: list[str] = []
    in_vertex = False
    body_start = None
    for i, line in enumerate(lines[1:], 1):
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "format" and tok[1] != "ascii":
            raise ParseError(f"{path}: only ASCII PLY is supported")
        if tok[0] == "element":
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                n_vertices = int(tok[2])
        elif tok[0] == "property" and in_vertex:
            props.append(tok[-1])
        elif tok[0] == "end_header":
            body_start = i + 1
            break
    if body_start is None or n_vertices is None:
        raise ParseError(f"{path}: malformed PLY header")
    try:
        ix = [props.index(a) for a in ("x", "y", "z")]
    except ValueError:
        raise ParseError(f"{path}: vertex element lacks x/y/z") from None
    rows = []
    for line in lines[body_start:body_start + n_vertices]:
        vals = line.split()
        rows.append([float(vals[j]) for j in ix])
    if len(rows) != n_vertices:
        raise ParseError(f"{path}: expected {n_vertices} vertices, found {len(rows)}")
    return _points(rows, path)


def read_obj(path: str | os.PathLike) -> tuple[np.ndarray, np.ndarray]:
    """Vertices and triangle faces; polygons are fan-triangulated."""
    verts, faces = [], []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "v":
            verts.append([float(v) for v in tok[1:4]])
        elif tok[0] == "f":
            idx = []
            for t in tok[1:]:
                j = int(t.split("/")[0])
                idx.append(j - 1 if j > 0 else len(verts) + j)
            if len(idx) < 3:
                raise ParseError(f"{path}:{lineno}: face with fewer than 3 vertices")
            for a in range(1, len(idx) - 1):
                faces.append([idx[0], idx[a], idx[a + 1]])
    points = _points(verts, path)
    return points, np.asarray(faces, dtype=np.int64).reshape(-1, 3)


def read_points(path: str | os.PathLike) -> np.ndarray:
    suffix = Path(path).suffix.lower()
    if suffix == ".ply":
        return read_ply(path)
    if suffix == ".obj":
        return read_obj(path)[0]
    return read_xyz(path)


def write_obj(path: str | os.PathLike, positions: np.ndarray, faces: np.ndarray) -> None:
    with open(path, "w") as fh:
        for x, y, z in positions:
            fh.write(f"v {float(x)!r} {float(y)!r} {float(z)!r}\n")
        for a, b, c in faces:
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")


def write_xyz(path: str | os.PathLike, positions: np.ndarray) -> None:
    np.savetxt(path, positions, fmt="%.17g")


def _points(rows, path) -> np.ndarray:
    if not rows:
        raise ParseError("no points parsed")
    pts = np.asarray(rows, dtype=np.float64)
    if not np.isfinite(pts).all():
        raise ParseError(f"{path}: non-finite coordinates")
    return pts
