"""Wall-clock scaling of the non-network refinement stages."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .laplacian import build_knn_laplacian
from .numerics import dense_sym_eig
from .shapes import sphere_cloud
from .subspace import weighted_orthonormalize

log = logging.getLogger(__name__)

STAGES = ("qr", "projection", "dense_eig")


@dataclass
class Timing:
    N: int
    stage: str
    seconds: float
    repeat: int


def time_stages(L, mass, F, forward=None) -> dict[str, float]:
    out = {}
    if forward is not None:
        t0 = time.perf_counter()
        F = forward()
        out["forward"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    Y = weighted_orthonormalize(F, mass).Y
    out["qr"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    L_hat = Y.T @ (L @ Y)
    L_hat = 0.5 * (L_hat + L_hat.T)
    out["projection"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    dense_sym_eig(L_hat)
    out["dense_eig"] = time.perf_counter() - t0
    return out


def bench_scaling(sizes, m: int = 192, repeat: int = 5, k_neighbors: int = 12, seed: int = 0,
                  forward_factory=None) -> list[Timing]:
    """Time each stage on synthetic sphere clouds of the given sizes.

    ``forward_factory(points, mass)`` may return a zero-argument callable
    producing F, in which case the network forward pass is timed too.
    """
    rows: list[Timing] = []
    rng = np.random.default_rng(seed)
    for N in sizes:
        X = sphere_cloud(int(N), seed)
        ops = build_knn_laplacian(X, k_neighbors)
        F = rng.standard_normal((int(N), m))
        forward = forward_factory(X, ops.mass) if forward_factory else None
        # one untimed pass warms caches and thread pools
        time_stages(ops.L, ops.mass, F)
        for r in range(repeat):
            for stage, sec in time_stages(ops.L, ops.mass, F, forward).items():
                rows.append(Timing(int(N), stage, sec, r))
    return rows


def fit_slopes(rows: list[Timing]) -> dict[str, float]:
    """Log-log slope of mean time vs N per stage, plus the qr+projection sum."""
    stages = sorted({r.stage for r in rows})
    sizes = sorted({r.N for r in rows})
    means = {s: np.array([np.mean([r.seconds for r in rows if r.stage == s and r.N == n]) for n in sizes])
             for s in stages}
    if "qr" in means and "projection" in means:
        means["qr+projection"] = means["qr"] + means["projection"]
    if len(sizes) < 2:
        log.warning("need at least two sizes to fit a slope")
        return {s: float("nan") for s in means}
    logN = np.log(np.asarray(sizes, dtype=np.float64))
    return {s: float(np.polyfit(logN, np.log(t), 1)[0]) for s, t in means.items()}


def rows_csv(rows: list[Timing], header: bool = True) -> str:
    out = ["N,stage,seconds,repeat\n"] if header else []
    out += [f"{r.N},{r.stage},{float(r.seconds)!r},{r.repeat}\n" for r in rows]
    return "".join(out)
