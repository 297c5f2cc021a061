"""Multi-head softmax attention with an optional per-key log-mass bias."""
from __future__ import annotations

import numpy as np


def mass_bias(w: np.ndarray) -> np.ndarray:
    """log w shifted so the largest mass maps to 0.

    Softmax is shift invariant, so the shift changes nothing mathematically;
    it makes a constant mass vector produce an exactly zero bias.
    """
    w = np.asarray(w, dtype=np.float64)
    if not (w > 0).all():
        raise ValueError("attention masses must be strictly positive")
    lw = np.log(w)
    return lw - lw.max()


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def multihead_attention(Q: np.ndarray, K: np.ndarray, V: np.ndarray, heads: int = 1,
                        bias: np.ndarray | None = None) -> np.ndarray:
    """Scaled dot-product attention per head; heads concatenated.

    Q is (r, h*dh), K and V are (N, h*dh); ``bias`` (N,) is added to every
    query's logits in every head.
    """
    r, inner = Q.shape
    N = K.shape[0]
    if inner % heads or K.shape[1] != inner or V.shape[0] != N:
        raise ValueError("inconsistent attention shapes")
    dh = inner // heads
    q = Q.reshape(r, heads, dh).transpose(1, 0, 2)
    k = K.reshape(N, heads, dh).transpose(1, 0, 2)
    v = V.reshape(N, heads, V.shape[1] // heads).transpose(1, 0, 2)
    logits = q @ k.transpose(0, 2, 1) / np.sqrt(dh)
    if bias is not None:
        logits = logits + bias[None, None, :]
    out = softmax(logits) @ v
    return out.transpose(1, 0, 2).reshape(r, -1)


def standard_down_attention(Q_lat, K, V, heads: int = 1, W_o=None) -> np.ndarray:
    """Latent queries average point values with plain softmax weights."""
    out = multihead_attention(Q_lat, K, V, heads)
    return out if W_o is None else out @ W_o


def mass_down_attention(Q_lat, K, V, w, heads: int = 1, W_o=None) -> np.ndarray:
    """Softmax weights proportional to kernel * mass: a quadrature over the surface."""
    out = multihead_attention(Q_lat, K, V, heads, bias=mass_bias(w))
    return out if W_o is None else out @ W_o
