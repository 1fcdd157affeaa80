"""Trainable tensors, addressed by name.

Every tensor lives in one ordered mapping so the optimizer, the checkpoint
writer, and the finite-difference checker can all walk the same manifest.
Layer tensors are named "layer{i}.{block}.{field}"; the classification head
is "head.w" / "head.b".
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from dialemo.model.config import ModelConfig

INIT_STD = 0.02


def param_shapes(cfg: ModelConfig) -> "OrderedDict[str, tuple[int, ...]]":
    """Manifest order: embeddings, layers bottom-up, classification head."""
    d, f = cfg.d_model, cfg.d_ff
    shapes: OrderedDict[str, tuple[int, ...]] = OrderedDict()
    shapes["token_emb"] = (cfg.vocab_size, d)
    shapes["pos_emb"] = (cfg.max_len, d)
    shapes["seg_emb"] = (2, d)
    for i in range(cfg.n_layers):
        p = f"layer{i}"
        shapes[f"{p}.attn.wq"] = (d, d)
        shapes[f"{p}.attn.bq"] = (d,)
        shapes[f"{p}.attn.wk"] = (d, d)
        shapes[f"{p}.attn.bk"] = (d,)
        shapes[f"{p}.attn.wv"] = (d, d)
        shapes[f"{p}.attn.bv"] = (d,)
        shapes[f"{p}.attn.wo"] = (d, d)
        shapes[f"{p}.attn.bo"] = (d,)
        shapes[f"{p}.ln1.gamma"] = (d,)
        shapes[f"{p}.ln1.beta"] = (d,)
        shapes[f"{p}.ffn.w1"] = (d, f)
        shapes[f"{p}.ffn.b1"] = (f,)
        shapes[f"{p}.ffn.w2"] = (f, d)
        shapes[f"{p}.ffn.b2"] = (d,)
        shapes[f"{p}.ln2.gamma"] = (d,)
        shapes[f"{p}.ln2.beta"] = (d,)
    shapes["head.w"] = (cfg.n_labels, d)
    shapes["head.b"] = (cfg.n_labels,)
    return shapes


class ModelParams:
    """An ordered name -> float64 array mapping with shape validation."""

    def __init__(self, tensors: "OrderedDict[str, np.ndarray]"):
        self.tensors = tensors

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        self.tensors[name] = value

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def names(self) -> list[str]:
        return list(self.tensors.keys())

    def items(self):
        return self.tensors.items()

    def copy(self) -> "ModelParams":
        return ModelParams(OrderedDict((k, v.copy()) for k, v in self.tensors.items()))

    def n_parameters(self) -> int:
        return sum(v.size for v in self.tensors.values())

    def assert_finite(self) -> None:
        for name, t in self.tensors.items():
            if not np.all(np.isfinite(t)):
                raise FloatingPointError(f"non-finite values in parameter {name}")


def init_params(cfg: ModelConfig, rng: np.random.Generator, std: float = INIT_STD) -> ModelParams:
    """Weights ~ N(0, std^2); biases and layer-norm shifts 0; layer-norm scales 1."""
    tensors: OrderedDict[str, np.ndarray] = OrderedDict()
    for name, shape in param_shapes(cfg).items():
        if name.endswith(".gamma"):
            tensors[name] = np.ones(shape)
        elif name.endswith((".b", ".beta", ".bq", ".bk", ".bv", ".bo", ".b1", ".b2")):
            tensors[name] = np.zeros(shape)
        else:
            tensors[name] = rng.normal(0.0, std, size=shape)
    return ModelParams(tensors)


def zeros_like_params(params: ModelParams) -> "OrderedDict[str, np.ndarray]":
    return OrderedDict((k, np.zeros_like(v)) for k, v in params.items())
