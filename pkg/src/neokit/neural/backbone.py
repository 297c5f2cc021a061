"""Forward pass of the latent-bottleneck point operator.

Per block (pre-norm, residual throughout):

1. down: learned latent queries attend over the points; the point masses
   enter as a log bias on the logits when mass injection is on;
2. latent: self-attention and a gated feed-forward among the latents;
3. up: every point attends over the latents (no mass bias).
"""
from __future__ import annotations

import numpy as np

from .attention import mass_bias, multihead_attention
from .config import BackboneConfig

LN_EPS = 1e-5
FFN_MULT = 4

Weights = dict[str, np.ndarray]


def positional_encoding(points: np.ndarray, config: BackboneConfig) -> np.ndarray:
    """[x, sin(2^j pi x), cos(2^j pi x) for each integer j in range], per axis."""
    X = np.asarray(points, dtype=np.float64)
    lo, hi = config.pe_exponents
    feats = [X]
    for j in range(lo, hi + 1):
        a = (2.0 ** j) * np.pi * X
        feats += [np.sin(a), np.cos(a)]
    return np.concatenate(feats, axis=1)


def weight_shapes(config: BackboneConfig) -> dict[str, tuple[int, ...]]:
    D, I, r = config.width, config.inner_dim, config.latent_tokens
    H = FFN_MULT * D
    shapes: dict[str, tuple[int, ...]] = {
        "lift.W": (config.pe_dim, D),
        "lift.b": (D,),
    }
    for i in range(config.depth):
        p = f"block{i}."
        shapes[p + "latents"] = (r, D)
        for norm in ("down.norm_x", "down.norm_q", "self.norm", "ffn.norm", "up.norm_x", "up.norm_kv"):
            shapes[p + norm + ".g"] = (D,)
            shapes[p + norm + ".b"] = (D,)
        for att in ("down", "self", "up"):
            for proj in ("Wq", "Wk", "Wv"):
                shapes[f"{p}{att}.{proj}"] = (D, I)
            shapes[f"{p}{att}.Wo"] = (I, D)
        shapes[p + "ffn.W1"] = (D, H)
        shapes[p + "ffn.b1"] = (H,)
        shapes[p + "ffn.Wg"] = (D, H)
        shapes[p + "ffn.bg"] = (H,)
        shapes[p + "ffn.W2"] = (H, D)
        shapes[p + "ffn.b2"] = (D,)
    shapes["head.W"] = (D, config.output_fields)
    shapes["head.b"] = (config.output_fields,)
    return shapes


def n_parameters(config: BackboneConfig) -> int:
    return sum(int(np.prod(s)) for s in weight_shapes(config).values())


def init_weights(config: BackboneConfig, seed: int = 0) -> Weights:
    """Gaussian weights scaled by 1/sqrt(fan_in); norms at identity, biases zero."""
    rng = np.random.default_rng(seed)
    out: Weights = {}
    for name, shape in weight_shapes(config).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf == "g":
            out[name] = np.ones(shape)
        elif leaf.startswith("b"):
            out[name] = np.zeros(shape)
        elif leaf == "latents":
            out[name] = rng.standard_normal(shape)
        else:
            out[name] = rng.standard_normal(shape) / np.sqrt(shape[0])
    return out


def check_weights(config: BackboneConfig, weights: Weights) -> None:
    expected = weight_shapes(config)
    missing = sorted(set(expected) - set(weights))
    if missing:
        raise ValueError(f"weights missing {len(missing)} tensors, e.g. {missing[0]}")
    for name, shape in expected.items():
        if tuple(weights[name].shape) != shape:
            raise ValueError(f"{name}: expected shape {shape}, got {tuple(weights[name].shape)}")
        if not np.isfinite(weights[name]).all():
            raise ValueError(f"{name}: non-finite entries")


def layer_norm(x: np.ndarray, g: np.ndarray, b: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + LN_EPS) * g + b


def silu(x: np.ndarray) -> np.ndarray:
    return x / (1.0 + np.exp(-x))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _norm(W: Weights, name: str, x: np.ndarray) -> np.ndarray:
    return layer_norm(x, W[name + ".g"], W[name + ".b"])


def lrsa_block_forward(H: np.ndarray, w: np.ndarray, config: BackboneConfig, weights: Weights,
                       index: int = 0) -> np.ndarray:
    p = f"block{index}."
    W = {k[len(p):]: v for k, v in weights.items() if k.startswith(p)}
    heads = config.heads
    bias = mass_bias(w) if config.mass_injection else None

    Z = W["latents"]
    Hn = _norm(W, "down.norm_x", H)
    Zn = _norm(W, "down.norm_q", Z)
    Z = Z + multihead_attention(Zn @ W["down.Wq"], Hn @ W["down.Wk"], Hn @ W["down.Wv"],
                                heads, bias) @ W["down.Wo"]

    Zn = _norm(W, "self.norm", Z)
    Z = Z + multihead_attention(Zn @ W["self.Wq"], Zn @ W["self.Wk"], Zn @ W["self.Wv"], heads) @ W["self.Wo"]
    Zn = _norm(W, "ffn.norm", Z)
    gated = (Zn @ W["ffn.W1"] + W["ffn.b1"]) * _sigmoid(Zn @ W["ffn.Wg"] + W["ffn.bg"])
    Z = Z + gated @ W["ffn.W2"] + W["ffn.b2"]

    Hn = _norm(W, "up.norm_x", H)
    Zn = _norm(W, "up.norm_kv", Z)
    return H + multihead_attention(Hn @ W["up.Wq"], Zn @ W["up.Wk"], Zn @ W["up.Wv"], heads) @ W["up.Wo"]


def neo_forward(points: np.ndarray, w: np.ndarray, config: BackboneConfig, weights: Weights,
                check: bool = True) -> np.ndarray:
    """Raw fields F (N x output_fields) for normalized points with masses w."""
    X = np.asarray(points, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != 3 or w.shape != (X.shape[0],):
        raise ValueError("expected N x 3 points and N masses")
    if check:
        check_weights(config, weights)
    H = silu(positional_encoding(X, config) @ weights["lift.W"] + weights["lift.b"])
    for i in range(config.depth):
        H = lrsa_block_forward(H, w, config, weights, i)
    return H @ weights["head.W"] + weights["head.b"]
