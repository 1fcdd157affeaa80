"""Bag-of-words + multinomial logistic regression baseline.

The vocabulary is capped to the most frequent tokens of the training split
only; features are raw token counts in sparse form.  The classifier is
softmax regression fit by full-batch gradient descent (with momentum) on
mean cross-entropy plus an L2 penalty, deterministic from a zero init.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from dialemo.errors import TrainingDiverged
from dialemo.tokenizer import pretokenize

BOW_VOCAB_CAP = 10000


def build_bow_vocab(texts: Sequence[str], cap: int = BOW_VOCAB_CAP) -> dict[str, int]:
    """Top ``cap`` tokens by frequency, ties broken lexicographically."""
    freq: dict[str, int] = {}
    for t in texts:
        for tok in pretokenize(t, lowercase=True):
            freq[tok] = freq.get(tok, 0) + 1
    keep = sorted(freq, key=lambda w: (-freq[w], w))[:cap]
    return {w: i for i, w in enumerate(keep)}


def bow_featurize(texts: Sequence[str], vocab: dict[str, int]) -> sp.csr_matrix:
    """Token-count vectors over the vocabulary; out-of-vocab tokens are ignored."""
    data, indices, indptr = [], [], [0]
    for t in texts:
        counts: dict[int, int] = {}
        for tok in pretokenize(t, lowercase=True):
            col = vocab.get(tok)
            if col is not None:
                counts[col] = counts.get(col, 0) + 1
        for col in sorted(counts):
            indices.append(col)
            data.append(counts[col])
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.array(data, dtype=np.float64), indices, indptr),
        shape=(len(texts), len(vocab)),
    )


@dataclass
class LogRegModel:
    weights: np.ndarray  # (K, F)
    bias: np.ndarray     # (K,)

    def predict_proba(self, X: sp.csr_matrix) -> np.ndarray:
        logits = X @ self.weights.T + self.bias
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X: sp.csr_matrix) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)


def train_logreg(
    X: sp.csr_matrix,
    y: Sequence[int],
    l2: float = 1e-4,
    iters: int = 300,
    lr: float = 0.5,
    momentum: float = 0.9,
) -> LogRegModel:
    """Softmax regression on mean cross-entropy + (l2/2)||W||^2.

    The bias is unpenalized.  Zero init makes the fit deterministic.
    """
    y = np.asarray(y, dtype=np.int64)
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValueError("need at least two classes present in the labels")
    k = int(classes.max()) + 1
    n, f = X.shape
    onehot = np.zeros((n, k))
    onehot[np.arange(n), y] = 1.0

    model = LogRegModel(np.zeros((k, f)), np.zeros(k))
    vel_w = np.zeros_like(model.weights)
    vel_b = np.zeros_like(model.bias)
    xt = X.T.tocsr()
    for it in range(iters):
        probs = model.predict_proba(X)
        err = (probs - onehot) / n
        grad_w = (xt @ err).T + l2 * model.weights
        grad_b = err.sum(axis=0)
        if not (np.all(np.isfinite(grad_w)) and np.all(np.isfinite(grad_b))):
            raise TrainingDiverged(f"non-finite gradient at iteration {it}")
        vel_w = momentum * vel_w - lr * grad_w
        vel_b = momentum * vel_b - lr * grad_b
        model.weights += vel_w
        model.bias += vel_b
    return model
