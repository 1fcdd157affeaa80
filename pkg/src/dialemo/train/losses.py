"""Classification losses and class-frequency weights.

Two losses drive fine-tuning: plain mean negative log likelihood, and the
weighted balanced warming variant used in the first epoch only.  The warmed
loss is implemented literally as printed: the class weight multiplies the
probability inside the log, and the normalizer is the sum of the gold-label
weights over the batch, so the weight term shifts the loss value per class
while the 1/sum(w) normalization rescales the gradient.

Class weights are w_c = min(freq)/freq(c): the rarest class gets weight 1.0
exactly and everything else less.
"""

from __future__ import annotations

import logging

import numpy as np

PROB_FLOOR = 1e-12

logger = logging.getLogger(__name__)
_clamp_events = 0


def clamp_count() -> int:
    """How many gold probabilities have been floored at 1e-12 so far."""
    return _clamp_events


def _gold_probs(P: np.ndarray, gold: np.ndarray) -> np.ndarray:
    global _clamp_events
    p = P[np.arange(len(gold)), gold]
    n_low = int(np.count_nonzero(p < PROB_FLOOR))
    if n_low:
        _clamp_events += n_low
        logger.warning("clamped %d gold probabilities at %g", n_low, PROB_FLOOR)
        p = np.maximum(p, PROB_FLOOR)
    return p


def class_weights(counts: dict) -> dict:
    """w_c = min(count)/count(c); every weight in (0, 1], rarest class exactly 1."""
    if not counts:
        raise ValueError("counts is empty")
    for label, c in counts.items():
        if c <= 0:
            raise ValueError(f"count for {label} is {c}; weights undefined")
    lo = min(counts.values())
    return {label: lo / c for label, c in counts.items()}


def nll_loss(P: np.ndarray, gold: np.ndarray) -> float:
    """Mean of -log p(gold); gold probabilities floored at 1e-12."""
    P = np.asarray(P, dtype=np.float64)
    gold = np.asarray(gold, dtype=np.int64)
    return float(-np.log(_gold_probs(P, gold)).mean())


def nll_loss_grad(P: np.ndarray, gold: np.ndarray) -> np.ndarray:
    """dL/dlogits for softmax + mean NLL: (P - onehot) / N."""
    P = np.asarray(P, dtype=np.float64)
    g = P.copy()
    g[np.arange(len(gold)), gold] -= 1.0
    return g / len(gold)


def weighted_nll_loss(P: np.ndarray, gold: np.ndarray, w: np.ndarray) -> float:
    """-(1/sum w_gold) * sum log(w_gold * p_gold); w indexed by class."""
    P = np.asarray(P, dtype=np.float64)
    gold = np.asarray(gold, dtype=np.int64)
    w = np.asarray(w, dtype=np.float64)
    wg = w[gold]
    return float(-np.log(wg * _gold_probs(P, gold)).sum() / wg.sum())


def weighted_nll_loss_grad(P: np.ndarray, gold: np.ndarray, w: np.ndarray) -> np.ndarray:
    """dL/dlogits for the warmed loss: (P - onehot) / sum(w_gold).

    The in-log weight is constant w.r.t. the parameters; only the batch
    normalizer survives differentiation.
    """
    P = np.asarray(P, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    g = P.copy()
    g[np.arange(len(gold)), gold] -= 1.0
    return g / w[np.asarray(gold, dtype=np.int64)].sum()
