"""Exact analytic gradients for every trainable tensor.

The backward pass replays the ForwardTrace in reverse: classification head,
pooled-vector dropout, the stacked layers (layer norm, feed-forward,
attention, residuals), and finally the three embedding tables via
scatter-adds.  Gradient keys match the parameter manifest names exactly.
"""

from __future__ import annotations

import numpy as np

from dialemo.model import backend
from dialemo.model.config import ModelConfig
from dialemo.model.encoder import ForwardTrace, _merge_heads, _split_heads
from dialemo.model.params import ModelParams


def dropout_backward(trace: ForwardTrace, d_c_drop: np.ndarray) -> np.ndarray:
    """Gradient through the pooled-vector dropout (identity in eval mode)."""
    if trace.keep_mask is None:
        return d_c_drop
    return d_c_drop * trace.keep_mask / (1.0 - trace.dropout_rate)


def head_backward(trace: ForwardTrace, params: ModelParams, dlogits: np.ndarray):
    """Returns ({head.w, head.b} grads, gradient w.r.t. the head input c_drop)."""
    grads = {
        "head.w": dlogits.T @ trace.c_drop,
        "head.b": dlogits.sum(axis=0),
    }
    return grads, dlogits @ params["head.w"]


def _ln_backward(d_out3d, xhat, inv_std, gamma):
    b, t, d = d_out3d.shape
    dx, dgamma, dbeta = backend.layernorm_backward(
        np.ascontiguousarray(d_out3d.reshape(-1, d)), xhat, inv_std, gamma
    )
    return dx.reshape(b, t, d), dgamma, dbeta


def backward_from_hidden(
    trace: ForwardTrace,
    params: ModelParams,
    cfg: ModelConfig,
    d_hidden: np.ndarray,
) -> dict[str, np.ndarray]:
    """Backpropagate a gradient on the final hidden states down to the embeddings."""
    grads: dict[str, np.ndarray] = {}
    dx = d_hidden
    for i in reversed(range(cfg.n_layers)):
        p = f"layer{i}"
        lt = trace.layers[i]
        b, t, d = lt.x_in.shape
        f = cfg.d_ff

        dr2, grads[f"{p}.ln2.gamma"], grads[f"{p}.ln2.beta"] = _ln_backward(
            dx, lt.xhat2, lt.inv_std2, params[f"{p}.ln2.gamma"]
        )
        dy1 = dr2.copy()

        # z2 = g @ w2 + b2
        dz2_flat = dr2.reshape(-1, d)
        g_flat = lt.g.reshape(-1, f)
        grads[f"{p}.ffn.w2"] = g_flat.T @ dz2_flat
        grads[f"{p}.ffn.b2"] = dz2_flat.sum(axis=0)
        dg = dr2 @ params[f"{p}.ffn.w2"].T
        dz1 = backend.gelu_backward(
            np.ascontiguousarray(lt.z1.reshape(-1, f)),
            np.ascontiguousarray(dg.reshape(-1, f)),
        ).reshape(b, t, f)

        # z1 = y1 @ w1 + b1
        y1_flat = lt.y1.reshape(-1, d)
        grads[f"{p}.ffn.w1"] = y1_flat.T @ dz1.reshape(-1, f)
        grads[f"{p}.ffn.b1"] = dz1.reshape(-1, f).sum(axis=0)
        dy1 += dz1 @ params[f"{p}.ffn.w1"].T

        dr1, grads[f"{p}.ln1.gamma"], grads[f"{p}.ln1.beta"] = _ln_backward(
            dy1, lt.xhat1, lt.inv_std1, params[f"{p}.ln1.gamma"]
        )
        dx_in = dr1.copy()

        # attn_out = ctx @ wo + bo
        d_attn_flat = dr1.reshape(-1, d)
        grads[f"{p}.attn.wo"] = lt.ctx.reshape(-1, d).T @ d_attn_flat
        grads[f"{p}.attn.bo"] = d_attn_flat.sum(axis=0)
        dctx = _split_heads(dr1 @ params[f"{p}.attn.wo"].T, cfg.n_heads)

        # ctx_h = attn_w @ v
        d_attn_w = dctx @ lt.v.transpose(0, 1, 3, 2)
        dv = lt.attn_w.transpose(0, 1, 3, 2) @ dctx

        # softmax rows: masked columns have weight exactly 0, so their score
        # gradient vanishes automatically.
        ds = lt.attn_w * (d_attn_w - (d_attn_w * lt.attn_w).sum(axis=-1, keepdims=True))
        ds /= np.sqrt(cfg.d_head)
        dq = ds @ lt.k
        dk = ds.transpose(0, 1, 3, 2) @ lt.q

        x_flat = lt.x_in.reshape(-1, d)
        for name, dvec in (("q", dq), ("k", dk), ("v", dv)):
            d3 = _merge_heads(dvec)
            grads[f"{p}.attn.w{name}"] = x_flat.T @ d3.reshape(-1, d)
            grads[f"{p}.attn.b{name}"] = d3.reshape(-1, d).sum(axis=0)
            dx_in += d3 @ params[f"{p}.attn.w{name}"].T
        dx = dx_in

    grads["token_emb"] = np.zeros_like(params["token_emb"])
    np.add.at(grads["token_emb"], trace.ids, dx)
    grads["pos_emb"] = dx.sum(axis=0)
    grads["seg_emb"] = np.zeros_like(params["seg_emb"])
    np.add.at(grads["seg_emb"], trace.segments, dx)
    return grads


def backward(
    trace: ForwardTrace,
    params: ModelParams,
    cfg: ModelConfig,
    dlogits: np.ndarray,
) -> dict[str, np.ndarray]:
    """Full gradient dictionary for a classification loss gradient dL/dlogits."""
    dlogits = np.asarray(dlogits, dtype=np.float64)
    if dlogits.shape != trace.logits.shape:
        raise ValueError(f"dlogits shape {dlogits.shape} != logits shape {trace.logits.shape}")
    grads, d_c_drop = head_backward(trace, params, dlogits)
    dc = dropout_backward(trace, d_c_drop)
    d_hidden = np.zeros_like(trace.hidden)
    d_hidden[:, 0, :] = dc
    grads.update(backward_from_hidden(trace, params, cfg, d_hidden))
    return grads
