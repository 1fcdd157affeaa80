"""Forward pass of the miniature transformer encoder.

Input embeddings are the sum of token, learned position, and segment
embeddings.  Each layer applies multi-head scaled dot-product self-attention
and a GELU feed-forward block, both with residual connections followed by
layer norm (post-norm).  The pooled vector C is the final hidden state at
the [CLS] position; the classification head is a softmax over C (with
dropout on C in training mode only).

The forward pass records every activation needed for the exact backward
pass in a ForwardTrace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from dialemo.model import backend
from dialemo.model.config import ModelConfig
from dialemo.model.params import ModelParams
from dialemo.tokenizer import EncodedSequence

LN_EPS = 1e-5


def softmax(x: np.ndarray) -> np.ndarray:
    """Stable softmax along the last axis, any leading shape."""
    x = np.asarray(x, dtype=np.float64)
    flat = np.ascontiguousarray(x.reshape(-1, x.shape[-1]))
    return backend.softmax_rows(flat).reshape(x.shape)


def scaled_dot_attention(
    Q: np.ndarray,
    K: np.ndarray,
    V: np.ndarray,
    mask: np.ndarray | None = None,
    return_weights: bool = False,
):
    """softmax(Q K^T / sqrt(d_k)) V with masked keys excluded.

    ``mask`` is a binary vector over keys (1 = attend, 0 = exclude); masked
    keys receive exactly zero weight.
    """
    Q, K, V = (np.asarray(a, dtype=np.float64) for a in (Q, K, V))
    if K.shape[0] != V.shape[0]:
        raise ValueError(f"K has {K.shape[0]} rows but V has {V.shape[0]}")
    scores = Q @ K.T / np.sqrt(Q.shape[-1])
    if mask is not None:
        mask = np.asarray(mask)
        if mask.shape[0] != K.shape[0]:
            raise ValueError(f"mask length {mask.shape[0]} != key count {K.shape[0]}")
        if not mask.any():
            raise ValueError("all keys are masked")
        scores = scores + np.where(mask == 1, 0.0, -np.inf)
    weights = softmax(scores)
    out = weights @ V
    return (out, weights) if return_weights else out


def _split_heads(x: np.ndarray, n_heads: int) -> np.ndarray:
    # (B, T, D) -> (B, h, T, D/h)
    b, t, d = x.shape
    return x.reshape(b, t, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    # (B, h, T, d_head) -> (B, T, D)
    b, h, t, dh = x.shape
    return np.ascontiguousarray(x.transpose(0, 2, 1, 3)).reshape(b, t, h * dh)


def _mha_forward(x, wq, bq, wk, bk, wv, bv, wo, bo, n_heads, mask_add):
    """Batched multi-head attention; returns output and backward caches."""
    q = _split_heads(x @ wq + bq, n_heads)
    k = _split_heads(x @ wk + bk, n_heads)
    v = _split_heads(x @ wv + bv, n_heads)
    scores = q @ k.transpose(0, 1, 3, 2) / np.sqrt(q.shape[-1])
    if mask_add is not None:
        scores = scores + mask_add
    attn_w = softmax(scores)
    ctx = _merge_heads(attn_w @ v)
    out = ctx @ wo + bo
    return out, q, k, v, attn_w, ctx


def multi_head_attention(
    X: np.ndarray,
    layer: dict[str, np.ndarray],
    n_heads: int,
    mask: np.ndarray | None = None,
) -> np.ndarray:
    """Per-head attention on projected Q/K/V, concatenated and output-projected.

    ``layer`` holds wq/bq/wk/bk/wv/bv/wo/bo; X is (T, d_model).
    """
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[-1]
    for name in ("wq", "wk", "wv", "wo"):
        if layer[name].shape != (d, d):
            raise ValueError(f"{name} has shape {layer[name].shape}, expected {(d, d)}")
    if d % n_heads != 0:
        raise ValueError(f"d_model={d} not divisible by n_heads={n_heads}")
    mask_add = None
    if mask is not None:
        mask = np.asarray(mask)
        if not mask.any():
            raise ValueError("all keys are masked")
        mask_add = np.where(mask == 1, 0.0, -np.inf)[None, None, None, :]
    out, *_ = _mha_forward(
        X[None],
        layer["wq"], layer["bq"], layer["wk"], layer["bk"],
        layer["wv"], layer["bv"], layer["wo"], layer["bo"],
        n_heads, mask_add,
    )
    return out[0]


def classify(C: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """P = softmax(C W^T + b); accepts a single vector or a batch."""
    C = np.asarray(C, dtype=np.float64)
    single = C.ndim == 1
    logits = np.atleast_2d(C) @ w.T + b
    p = softmax(logits)
    return p[0] if single else p


def _layernorm(x3d: np.ndarray, gamma: np.ndarray, beta: np.ndarray):
    b, t, d = x3d.shape
    y, xhat, inv_std = backend.layernorm_forward(
        np.ascontiguousarray(x3d.reshape(-1, d)), gamma, beta, LN_EPS
    )
    return y.reshape(b, t, d), xhat, inv_std


@dataclass
class LayerTrace:
    x_in: np.ndarray       # (B,T,D) residual stream entering the layer
    q: np.ndarray          # (B,h,T,d_head)
    k: np.ndarray
    v: np.ndarray
    attn_w: np.ndarray     # (B,h,T,T)
    ctx: np.ndarray        # (B,T,D) concatenated heads pre output projection
    xhat1: np.ndarray      # (B*T,D) layer-norm caches
    inv_std1: np.ndarray
    y1: np.ndarray         # (B,T,D) LN1 output, FFN input
    z1: np.ndarray         # (B,T,F) pre-GELU
    g: np.ndarray          # (B,T,F) post-GELU
    xhat2: np.ndarray
    inv_std2: np.ndarray


@dataclass
class ForwardTrace:
    """Everything the backward pass and the caller need from one forward run."""

    ids: np.ndarray          # (B,T)
    segments: np.ndarray
    attn_mask: np.ndarray
    layers: list[LayerTrace]
    hidden: np.ndarray       # (B,T,D) final hidden states
    pooled: np.ndarray       # (B,D) pre-dropout C
    keep_mask: np.ndarray | None
    dropout_rate: float
    c_drop: np.ndarray       # (B,D) head input
    logits: np.ndarray       # (B,K)
    probs: np.ndarray        # (B,K)

    @property
    def batch_size(self) -> int:
        return self.ids.shape[0]


def forward_batch(
    ids: np.ndarray,
    segments: np.ndarray,
    attn_mask: np.ndarray,
    params: ModelParams,
    cfg: ModelConfig,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> ForwardTrace:
    """Run the encoder plus classification head over a batch of (B, T) inputs."""
    ids = np.asarray(ids, dtype=np.int64)
    segments = np.asarray(segments, dtype=np.int64)
    attn_mask = np.asarray(attn_mask, dtype=np.int64)
    b, t = ids.shape
    if t != cfg.max_len:
        raise ValueError(f"sequence length {t} != configured max_len {cfg.max_len}")

    x = params["token_emb"][ids] + params["pos_emb"][None, :t] + params["seg_emb"][segments]
    mask_add = np.where(attn_mask == 1, 0.0, -np.inf)[:, None, None, :]

    traces = []
    for i in range(cfg.n_layers):
        p = f"layer{i}"
        attn_out, q, k, v, attn_w, ctx = _mha_forward(
            x,
            params[f"{p}.attn.wq"], params[f"{p}.attn.bq"],
            params[f"{p}.attn.wk"], params[f"{p}.attn.bk"],
            params[f"{p}.attn.wv"], params[f"{p}.attn.bv"],
            params[f"{p}.attn.wo"], params[f"{p}.attn.bo"],
            cfg.n_heads, mask_add,
        )
        y1, xhat1, inv_std1 = _layernorm(
            x + attn_out, params[f"{p}.ln1.gamma"], params[f"{p}.ln1.beta"]
        )
        z1 = y1 @ params[f"{p}.ffn.w1"] + params[f"{p}.ffn.b1"]
        g = backend.gelu_forward(np.ascontiguousarray(z1.reshape(-1, z1.shape[-1]))).reshape(z1.shape)
        z2 = g @ params[f"{p}.ffn.w2"] + params[f"{p}.ffn.b2"]
        x_next, xhat2, inv_std2 = _layernorm(
            y1 + z2, params[f"{p}.ln2.gamma"], params[f"{p}.ln2.beta"]
        )
        if not np.all(np.isfinite(x_next)):
            raise FloatingPointError(f"non-finite activation leaving layer {i}")
        traces.append(
            LayerTrace(x, q, k, v, attn_w, ctx, xhat1, inv_std1, y1, z1, g, xhat2, inv_std2)
        )
        x = x_next

    pooled = x[:, 0, :]
    keep_mask = None
    rate = 0.0
    c_drop = pooled
    if train_mode and cfg.dropout_head > 0.0:
        if rng is None:
            raise ValueError("train_mode with dropout requires an rng")
        rate = cfg.dropout_head
        keep_mask = (rng.random(pooled.shape) >= rate).astype(np.float64)
        c_drop = pooled * keep_mask / (1.0 - rate)

    logits = c_drop @ params["head.w"].T + params["head.b"]
    probs = softmax(logits)
    if not np.all(np.isfinite(probs)):
        raise FloatingPointError("non-finite activation in classification head")
    return ForwardTrace(
        ids=ids,
        segments=segments,
        attn_mask=attn_mask,
        layers=traces,
        hidden=x,
        pooled=pooled,
        keep_mask=keep_mask,
        dropout_rate=rate,
        c_drop=c_drop,
        logits=logits,
        probs=probs,
    )


def batch_arrays(batch: list[EncodedSequence]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack encoded sequences into (ids, segments, attention_mask) arrays."""
    ids = np.array([e.ids for e in batch], dtype=np.int64)
    segs = np.array([e.segments for e in batch], dtype=np.int64)
    mask = np.array([e.attention_mask for e in batch], dtype=np.int64)
    return ids, segs, mask


def encoder_forward(
    e: EncodedSequence,
    params: ModelParams,
    cfg: ModelConfig,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> ForwardTrace:
    """Single-example wrapper around forward_batch (batch axis of size 1)."""
    ids, segs, mask = batch_arrays([e])
    return forward_batch(ids, segs, mask, params, cfg, train_mode=train_mode, rng=rng)
