"""Neural-network building blocks composed from tensor primitives.

Everything here is a pure function of tensors plus a parameter mapping, so
gradients come from the autodiff graph with no extra bookkeeping.
"""

from __future__ import annotations

import math

import numpy as np

from . import tensor as T
from .errors import EmptyKeysError, InvalidArgumentError
from .tensor import Tensor

INV_SQRT2 = 1.0 / math.sqrt(2.0)


def gelu(x: Tensor) -> Tensor:
    """Exact Gaussian-error-linear unit, 0.5·x·(1 + erf(x/√2))."""
    return T.mul(T.mul(x, 0.5), T.add(1.0, T.erf(T.mul(x, INV_SQRT2))))


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last dimension to zero mean / unit variance, then affine."""
    d = x.shape[-1]
    if d < 2:
        raise InvalidArgumentError(f"layer_norm needs last dimension ≥ 2, got {d}")
    if gain.shape != (d,) or bias.shape != (d,):
        raise InvalidArgumentError(
            f"gain/bias must have shape ({d},), got {gain.shape} and {bias.shape}"
        )
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    normed = centered / T.sqrt(var + eps)
    return normed * gain + bias


def linear(x: Tensor, params) -> Tensor:
    return x @ params["w"] + params["b"]


def ffn(x: Tensor, params) -> Tensor:
    """Two-layer MLP with a GELU between: (x·w1 + b1) → gelu → (·w2 + b2)."""
    return gelu(x @ params["w1"] + params["b1"]) @ params["w2"] + params["b2"]


def batched_cross_attention(
    queries: Tensor,
    keys: Tensor,
    values: Tensor,
    heads: int,
    params,
    mask: np.ndarray | None = None,
) -> Tensor:
    """Scaled dot-product attention over a batch of sequences.

    ``queries`` is B_q×N_q×D with B_q either 1 (shared queries, broadcast
    over the key batch) or B; ``keys``/``values`` are B×N_k×D. The result
    is B×N_q×D. ``mask``, when given, is an additive N_q×N_k logit bias
    (-inf forbids attending).
    """
    b_q, n_q, d = queries.shape
    b, n_k, d_k = keys.shape
    if n_k == 0:
        raise EmptyKeysError("attention over zero keys; callers must guard")
    if keys.shape != values.shape:
        raise InvalidArgumentError(
            f"keys shape {keys.shape} != values shape {values.shape}"
        )
    if d_k != d:
        raise InvalidArgumentError(f"key width {d_k} != query width {d}")
    if b_q not in (1, b):
        raise InvalidArgumentError(f"query batch {b_q} incompatible with key batch {b}")
    if d % heads != 0:
        raise InvalidArgumentError(f"width {d} not divisible by {heads} heads")
    hd = d // heads

    q = (queries @ params["wq"] + params["bq"]).reshape(b_q, n_q, heads, hd).transpose(0, 2, 1, 3)
    k = (keys @ params["wk"] + params["bk"]).reshape(b, n_k, heads, hd).transpose(0, 2, 1, 3)
    v = (values @ params["wv"] + params["bv"]).reshape(b, n_k, heads, hd).transpose(0, 2, 1, 3)

    logits = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(hd))  # B×heads×N_q×N_k
    if mask is not None:
        logits = logits + mask
    attn = T.softmax(logits, axis=-1)
    mixed = attn @ v  # B×heads×N_q×hd
    merged = mixed.transpose(0, 2, 1, 3).reshape(b, n_q, d)
    return merged @ params["wo"] + params["bo"]


def multi_head_cross_attention(
    queries: Tensor,
    keys: Tensor,
    values: Tensor,
    heads: int,
    params,
    mask: np.ndarray | None = None,
) -> Tensor:
    """Single-sequence attention: N_q×D queries over N_k×D keys/values."""
    n_q, d = queries.shape
    out = batched_cross_attention(
        queries.reshape(1, n_q, d),
        keys.reshape(1, *keys.shape),
        values.reshape(1, *values.shape),
        heads,
        params,
        mask=mask,
    )
    return out.reshape(n_q, d)
