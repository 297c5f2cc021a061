"""Tiny-model fitting demo driven by simultaneous-perturbation gradients.

There is no backpropagation here: each step perturbs every weight by a
random +-c and estimates the gradient from two forward passes.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..losses import DEFAULT_ALPHA, loss_value
from .backbone import Weights, init_weights, n_parameters, neo_forward
from .config import TINY, BackboneConfig

log = logging.getLogger(__name__)

MAX_PARAMS = 5000


class DivergenceError(RuntimeError):
    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


@dataclass
class OverfitResult:
    trace: np.ndarray
    weights: Weights

    @property
    def best(self) -> np.ndarray:
        return np.minimum.accumulate(self.trace)


def _flatten(weights: Weights) -> tuple[np.ndarray, list[tuple[str, tuple]]]:
    layout = [(k, v.shape) for k, v in weights.items()]
    return np.concatenate([v.ravel() for v in weights.values()]), layout


def _unflatten(theta: np.ndarray, layout) -> Weights:
    out, pos = {}, 0
    for name, shape in layout:
        size = int(np.prod(shape))
        out[name] = theta[pos:pos + size].reshape(shape)
        pos += size
    return out


def micro_overfit_demo(points: np.ndarray, mass: np.ndarray, U: np.ndarray,
                       config: BackboneConfig = TINY, iters: int = 500, seed: int = 0,
                       alpha: float = DEFAULT_ALPHA, a: float = 0.2, c: float = 0.02,
                       stability: float = 50.0) -> OverfitResult:
    """Fit the network's span to U with SPSA; returns the total-loss trace.

    Gains follow the usual SPSA decay a_t = a / (t + 1 + stability)^0.602 and
    c_t = c / (t + 1)^0.101.  Aborts with DivergenceError when the loss
    exceeds ten times its initial value.
    """
    if n_parameters(config) > MAX_PARAMS:
        raise ValueError(f"demo config has {n_parameters(config)} parameters, limit is {MAX_PARAMS}")
    N, k = U.shape
    if N > 512 or k > 8 or config.output_fields > 16:
        raise ValueError("demo limits: N <= 512, k <= 8, m <= 16")
    rng = np.random.default_rng(seed)
    theta, layout = _flatten(init_weights(config, seed))

    def loss(th):
        F = neo_forward(points, mass, config, _unflatten(th, layout), check=False)
        return loss_value(F, mass, U, alpha).total

    f0 = loss(theta)
    trace = [f0]
    for t in range(iters):
        a_t = a / (t + 1 + stability) ** 0.602
        c_t = c / (t + 1) ** 0.101
        delta = rng.choice([-1.0, 1.0], size=theta.size)
        g = (loss(theta + c_t * delta) - loss(theta - c_t * delta)) / (2.0 * c_t) * delta
        theta = theta - a_t * g
        f = loss(theta)
        trace.append(f)
        if not np.isfinite(f) or f > 10.0 * f0:
            raise DivergenceError(f"loss diverged at iteration {t + 1}: {f:.3e}", np.asarray(trace))
    return OverfitResult(np.asarray(trace), _unflatten(theta, layout))
