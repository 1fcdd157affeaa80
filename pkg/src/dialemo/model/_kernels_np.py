"""Pure-numpy reference implementations of the hot kernels.

Used when the compiled extension is unavailable (or disabled via
DIALEMO_PURE=1).  All functions take and return C-contiguous float64 arrays
and must stay semantically interchangeable with dialemo.model._kernels.
"""

from __future__ import annotations

import numpy as np

GELU_C = np.sqrt(2.0 / np.pi)
GELU_A = 0.044715


def softmax_rows(x: np.ndarray) -> np.ndarray:
    """Numerically stable softmax along the last axis of a 2-D array.

    Entries of -inf receive exactly zero weight; rows must contain at least
    one finite entry.
    """
    m = np.max(x, axis=-1, keepdims=True)
    e = np.exp(x - m)
    return e / e.sum(axis=-1, keepdims=True)


def layernorm_forward(x, gamma, beta, eps=1e-5):
    """Row-wise layer norm; returns (y, xhat, inv_std) for the backward pass."""
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std
    return xhat * gamma + beta, xhat, inv_std[:, 0]


def layernorm_backward(dy, xhat, inv_std, gamma):
    """Returns (dx, dgamma, dbeta)."""
    ghat = dy * gamma
    m1 = ghat.mean(axis=-1, keepdims=True)
    m2 = (ghat * xhat).mean(axis=-1, keepdims=True)
    dx = (ghat - m1 - xhat * m2) * inv_std[:, None]
    dgamma = (dy * xhat).sum(axis=0)
    dbeta = dy.sum(axis=0)
    return dx, dgamma, dbeta


def gelu_forward(x):
    """tanh-approximated GELU."""
    return 0.5 * x * (1.0 + np.tanh(GELU_C * (x + GELU_A * x**3)))


def gelu_backward(x, dy):
    """Exact derivative of the tanh-approximated GELU."""
    u = GELU_C * (x + GELU_A * x**3)
    t = np.tanh(u)
    du = GELU_C * (1.0 + 3.0 * GELU_A * x**2)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * du)
