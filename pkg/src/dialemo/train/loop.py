"""The fine-tuning loop with first-epoch weighted balanced warming.

Epoch 1 uses the warmed loss (when enabled and class weights are supplied);
later epochs use plain NLL.  Data order is reshuffled every epoch by one
seeded generator that also drives the dropout masks, so a run is a pure
function of (seed, config, data).  The checkpoint with the best validation
micro-F1 is the one returned.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from dialemo.errors import ConfigError, TrainingDiverged
from dialemo.evaluate import confusion, report
from dialemo.model import Model, backward, batch_arrays, forward_batch
from dialemo.model.params import INIT_STD
from dialemo.tokenizer import EncodedSequence
from dialemo.train.losses import (
    nll_loss,
    nll_loss_grad,
    weighted_nll_loss,
    weighted_nll_loss_grad,
)
from dialemo.train.optim import AdamState, adam_step


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 8
    learning_rate: float = 2.5e-6
    n_epochs: int = 3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 13
    warm_first_epoch: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate={self.learning_rate} must be positive")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size={self.batch_size} must be at least 1")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    val_micro_f1: float | None = None
    val_macro_f1: float | None = None

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "val_micro_f1": self.val_micro_f1,
            "val_macro_f1": self.val_macro_f1,
        }


def _stack(data: list[EncodedSequence]):
    ids, segs, mask = batch_arrays(data)
    labels = np.array([e.label for e in data], dtype=np.int64)
    return ids, segs, mask, labels


def predict_labels(model: Model, data: list[EncodedSequence], batch_size: int = 32) -> np.ndarray:
    """Deterministic argmax predictions (evaluation mode, no dropout)."""
    out = np.empty(len(data), dtype=np.int64)
    ids, segs, mask, _ = _stack(data)
    for lo in range(0, len(data), batch_size):
        hi = min(lo + batch_size, len(data))
        trace = forward_batch(ids[lo:hi], segs[lo:hi], mask[lo:hi], model.params, model.cfg)
        out[lo:hi] = np.argmax(trace.probs, axis=-1)
    return out


def _val_f1(model: Model, val: list[EncodedSequence]) -> tuple[float, float]:
    preds = predict_labels(model, val)
    golds = [e.label for e in val]
    labels = tuple(range(model.cfg.n_labels))
    r = report(confusion(list(preds), golds, labels=labels))
    return r.micro.f1, r.macro.f1


def train_classifier(
    model: Model,
    train_data: list[EncodedSequence],
    val_data: list[EncodedSequence],
    cfg: TrainConfig,
    weights: dict[int, float] | None = None,
) -> tuple[Model, list[EpochMetrics]]:
    """Fine-tune in place and return (best-validation model, per-epoch metrics).

    ``weights`` maps class index to the Eq.-6 frequency weight; required when
    warm_first_epoch is set.  With an empty validation list the final model
    is returned instead of the best one.
    """
    if not train_data:
        raise ValueError("training data is empty")
    if any(e.label is None for e in train_data):
        raise ValueError("training data contains unlabeled sequences")
    if cfg.warm_first_epoch and weights is not None:
        w_arr = np.ones(model.cfg.n_labels)
        for idx, w in weights.items():
            w_arr[idx] = w
    else:
        w_arr = None

    rng = np.random.default_rng(cfg.seed)
    ids, segs, mask, labels = _stack(train_data)
    n = len(train_data)
    state = AdamState()
    metrics: list[EpochMetrics] = []
    best: tuple[float, Model] | None = None

    for epoch in range(1, cfg.n_epochs + 1):
        warm = epoch == 1 and cfg.warm_first_epoch and w_arr is not None
        order = rng.permutation(n)
        total_loss = 0.0
        for lo in range(0, n, cfg.batch_size):
            sel = order[lo : lo + cfg.batch_size]
            trace = forward_batch(
                ids[sel], segs[sel], mask[sel], model.params, model.cfg,
                train_mode=True, rng=rng,
            )
            gold = labels[sel]
            if warm:
                loss = weighted_nll_loss(trace.probs, gold, w_arr)
                dlogits = weighted_nll_loss_grad(trace.probs, gold, w_arr)
            else:
                loss = nll_loss(trace.probs, gold)
                dlogits = nll_loss_grad(trace.probs, gold)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss {loss} at epoch {epoch}, batch {lo // cfg.batch_size}"
                )
            grads = backward(trace, model.params, model.cfg, dlogits)
            adam_step(
                model.params, grads, state, cfg.learning_rate,
                beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps,
            )
            total_loss += loss * len(sel)
        train_loss = total_loss / n

        if val_data:
            micro, macro = _val_f1(model, val_data)
            metrics.append(EpochMetrics(epoch, train_loss, micro, macro))
            if best is None or micro > best[0]:
                best = (micro, model.copy())
        else:
            metrics.append(EpochMetrics(epoch, train_loss))

    final = best[1] if best is not None else model
    return final, metrics


def reinit_head(model: Model, n_labels: int, rng: np.random.Generator) -> Model:
    """Replace the classification head with a fresh one of ``n_labels`` classes.

    Used when switching label spaces, e.g. from the 8 tweet emotions to the
    4 evaluation labels: the pre-trained head is discarded.
    """
    cfg = dataclasses.replace(model.cfg, n_labels=n_labels)
    params = model.params.copy()
    params["head.w"] = rng.normal(0.0, INIT_STD, size=(n_labels, cfg.d_model))
    params["head.b"] = np.zeros(n_labels)
    return Model(cfg, params)
