"""Masked-LM + next-sentence pre-training.

Per batch the loss is the sum of two means: masked-token cross-entropy and
the binary next-sentence cross-entropy.  The MLM output projection is tied
to the token embedding table (only a vocabulary-sized bias is extra); the
NSP head is a 2-way classifier on the pooled vector.  Both heads are
throwaway: fine-tuning keeps only the encoder weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dialemo.errors import TrainingDiverged
from dialemo.model import (
    Model,
    backward_from_hidden,
    batch_arrays,
    dropout_backward,
    forward_batch,
    softmax,
)
from dialemo.model.params import INIT_STD
from dialemo.tokenizer import MLMExample, Vocab, mask_for_mlm, sample_nsp_pairs
from dialemo.train.losses import PROB_FLOOR
from dialemo.train.loop import TrainConfig
from dialemo.train.optim import AdamState, adam_step


def init_pretrain_heads(model: Model, rng: np.random.Generator) -> dict[str, np.ndarray]:
    return {
        "mlm.bias": np.zeros(model.cfg.vocab_size),
        "nsp.w": rng.normal(0.0, INIT_STD, size=(2, model.cfg.d_model)),
        "nsp.b": np.zeros(2),
    }


@dataclass(frozen=True)
class PretrainEpochMetrics:
    epoch: int
    mlm_loss: float
    nsp_loss: float

    @property
    def total(self) -> float:
        return self.mlm_loss + self.nsp_loss

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "mlm_loss": self.mlm_loss,
            "nsp_loss": self.nsp_loss,
            "total_loss": self.total,
        }


def _gather_mlm(batch: list[MLMExample]):
    """Flatten (example, position, original id) triples in a fixed order."""
    rows, cols, origs = [], [], []
    for bi, ex in enumerate(batch):
        for pos in sorted(ex.targets):
            rows.append(bi)
            cols.append(pos)
            origs.append(ex.targets[pos])
    return np.array(rows), np.array(cols), np.array(origs)


def pretrain_batch_losses(
    model: Model,
    heads: dict[str, np.ndarray],
    batch: list[MLMExample],
    is_next: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
):
    """Forward both tasks; returns (mlm_loss, nsp_loss, trace, backprop caches)."""
    ids, segs, mask = batch_arrays([ex.corrupted for ex in batch])
    trace = forward_batch(ids, segs, mask, model.params, model.cfg, train_mode, rng)

    rows, cols, origs = _gather_mlm(batch)
    if len(rows):
        h_rows = trace.hidden[rows, cols]
        mlm_probs = softmax(h_rows @ model.params["token_emb"].T + heads["mlm.bias"])
        gold_p = np.maximum(mlm_probs[np.arange(len(origs)), origs], PROB_FLOOR)
        mlm_loss = float(-np.log(gold_p).mean())
    else:
        h_rows = mlm_probs = None
        mlm_loss = 0.0

    nsp_probs = softmax(trace.c_drop @ heads["nsp.w"].T + heads["nsp.b"])
    nsp_gold = np.maximum(nsp_probs[np.arange(len(is_next)), is_next], PROB_FLOOR)
    nsp_loss = float(-np.log(nsp_gold).mean())
    return mlm_loss, nsp_loss, trace, (rows, cols, origs, h_rows, mlm_probs, nsp_probs)


def _pretrain_batch_grads(model, heads, trace, is_next, caches):
    rows, cols, origs, h_rows, mlm_probs, nsp_probs = caches
    d_hidden = np.zeros_like(trace.hidden)
    grads: dict[str, np.ndarray] = {}

    if len(rows):
        d_mlm = mlm_probs.copy()
        d_mlm[np.arange(len(origs)), origs] -= 1.0
        d_mlm /= len(origs)
        grads["mlm.bias"] = d_mlm.sum(axis=0)
        token_out_grad = d_mlm.T @ h_rows
        np.add.at(d_hidden, (rows, cols), d_mlm @ model.params["token_emb"])
    else:
        grads["mlm.bias"] = np.zeros_like(heads["mlm.bias"])
        token_out_grad = None

    d_nsp = nsp_probs.copy()
    d_nsp[np.arange(len(is_next)), is_next] -= 1.0
    d_nsp /= len(is_next)
    grads["nsp.w"] = d_nsp.T @ trace.c_drop
    grads["nsp.b"] = d_nsp.sum(axis=0)
    d_hidden[:, 0, :] += dropout_backward(trace, d_nsp @ heads["nsp.w"])

    enc_grads = backward_from_hidden(trace, model.params, model.cfg, d_hidden)
    if token_out_grad is not None:
        enc_grads["token_emb"] += token_out_grad
    grads.update(enc_grads)
    # The fine-tuning head is untouched by both tasks.
    grads.pop("head.w", None)
    grads.pop("head.b", None)
    return grads


def pretrain_mlm_nsp(
    model: Model,
    scenes: list[list[str]],
    cfg: TrainConfig,
    vocab: Vocab,
    mlm_rate: float = 0.15,
    examples_per_epoch: int | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[Model, list[PretrainEpochMetrics]]:
    """Run both pre-training tasks over a scene-segmented corpus.

    Fresh examples are drawn every epoch: next-sentence pairs from the
    scenes, then 15% token corruption on each encoded sequence.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if examples_per_epoch is None:
        examples_per_epoch = sum(len(s) - 1 for s in scenes)
    heads = init_pretrain_heads(model, rng)
    tensors = dict(model.params.items()) | heads
    state = AdamState()
    metrics: list[PretrainEpochMetrics] = []

    for epoch in range(1, cfg.n_epochs + 1):
        nsp = sample_nsp_pairs(scenes, examples_per_epoch, rng, vocab, model.cfg.max_len)
        examples = [
            mask_for_mlm(ex.encoded, rate=mlm_rate, rng=rng, vocab=vocab) for ex in nsp
        ]
        labels = np.array([int(ex.is_next) for ex in nsp], dtype=np.int64)
        mlm_sum = nsp_sum = 0.0
        for lo in range(0, len(examples), cfg.batch_size):
            hi = min(lo + cfg.batch_size, len(examples))
            batch = examples[lo:hi]
            mlm_loss, nsp_loss, trace, caches = pretrain_batch_losses(
                model, heads, batch, labels[lo:hi], train_mode=True, rng=rng
            )
            if not np.isfinite(mlm_loss + nsp_loss):
                raise TrainingDiverged(
                    f"non-finite pre-training loss at epoch {epoch}, batch {lo // cfg.batch_size}"
                )
            grads = _pretrain_batch_grads(model, heads, trace, labels[lo:hi], caches)
            adam_step(tensors, grads, state, cfg.learning_rate,
                      beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
            mlm_sum += mlm_loss * len(batch)
            nsp_sum += nsp_loss * len(batch)
        metrics.append(
            PretrainEpochMetrics(epoch, mlm_sum / len(examples), nsp_sum / len(examples))
        )
    return model, metrics
