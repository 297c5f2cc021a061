"""Executable identities of mass-biased attention and the backbone.

Each check returns the observed deviation next to its tolerance, so a
caller can print it, assert on it, or expect it to fail.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import mass_down_attention, standard_down_attention
from .backbone import init_weights, neo_forward
from .config import TINY, BackboneConfig

CHECK_CONFIG = TINY.replace(depth=2)

TOLERANCES = {
    "constant_mass": 1e-15,
    "mass_scale": 1e-12,
    "point_split": 1e-12,
    "permutation": 1e-12,
}


@dataclass
class CheckResult:
    name: str
    deviation: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.deviation <= self.tol)


def _max_rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.abs(b).max()), 1.0)
    return float(np.abs(a - b).max()) / scale


def _split(points, w, j):
    """Duplicate point j, giving both copies half of its mass."""
    P = np.vstack([points, points[j:j + 1]])
    w2 = np.append(w, 0.5 * w[j])
    w2[j] *= 0.5
    return P, w2


def _down_layer_checks(rng, n, mass_aware=True, d=8, r=5, heads=2):
    Q = rng.standard_normal((r, d))
    K = rng.standard_normal((n, d))
    V = rng.standard_normal((n, d))
    w = rng.uniform(0.1, 2.0, n)
    const = standard_down_attention(Q, K, V, heads)
    dev_const = float(np.abs(mass_down_attention(Q, K, V, np.full(n, 0.37), heads) - const).max())
    if mass_aware:
        def down(K, V, w):
            return mass_down_attention(Q, K, V, w, heads)
    else:
        def down(K, V, w):
            return standard_down_attention(Q, K, V, heads)
    base = down(K, V, w)
    dev_scale = _max_rel(down(K, V, 123.4 * w), base)
    j = int(rng.integers(n))
    K2, w2 = _split(K, w, j)
    V2 = np.vstack([V, V[j:j + 1]])
    dev_split = _max_rel(down(K2, V2, w2), base)
    return dev_const, dev_scale, dev_split


def run_checks(seed: int = 0, n: int = 64, config: BackboneConfig = CHECK_CONFIG) -> list[CheckResult]:
    """Constant-mass, mass-scale, split and permutation checks.

    Each is measured on a single down-attention layer and end to end through
    the backbone; the reported deviation is the worse of the two.  The
    constant-mass backbone check compares against the same weights with mass
    injection switched off, so it only applies when injection is on.
    """
    rng = np.random.default_rng(seed)
    weights = init_weights(config, seed)
    X = rng.uniform(-1.0, 1.0, (n, 3))
    w = rng.uniform(0.1, 2.0, n)
    F = neo_forward(X, w, config, weights)

    layer = _down_layer_checks(rng, n, config.mass_injection)
    if config.mass_injection:
        c = np.full(n, 0.37)
        plain = neo_forward(X, c, config.replace(mass_injection=False), weights)
        net_const = float(np.abs(neo_forward(X, c, config, weights) - plain).max())
    else:
        net_const = 0.0
    net_scale = _max_rel(neo_forward(X, 123.4 * w, config, weights), F)
    j = int(rng.integers(n))
    X2, w2 = _split(X, w, j)
    F2 = neo_forward(X2, w2, config, weights)
    net_split = max(_max_rel(F2[:n], F), _max_rel(F2[n], F[j]))
    perm = rng.permutation(n)
    net_perm = _max_rel(neo_forward(X[perm], w[perm], config, weights), F[perm])

    return [
        CheckResult("constant_mass", max(layer[0], net_const), TOLERANCES["constant_mass"]),
        CheckResult("mass_scale", max(layer[1], net_scale), TOLERANCES["mass_scale"]),
        CheckResult("point_split", max(layer[2], net_split), TOLERANCES["point_split"]),
        CheckResult("permutation", net_perm, TOLERANCES["permutation"]),
    ]
