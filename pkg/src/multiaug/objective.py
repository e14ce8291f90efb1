"""Loss mathematics: normalized-cosine regression and softmax cross-entropy.

The pre-training objective regresses the online prediction onto the target
projection with negative cosine similarity, symmetrized over the two views.
Targets are gradient-blocked by construction: no operation here produces a
gradient for them.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "l2_normalize",
    "cosine_loss",
    "symmetrized_loss",
    "softmax_cross_entropy",
]

_EPS = 1e-12


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Row-wise v / (||v|| + eps); zero rows stay zero."""
    norms = np.sqrt((v * v).sum(axis=1, keepdims=True))
    return v / (norms + _EPS)


def cosine_loss(p: np.ndarray, z: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean over rows of -cos(p_i, z_i), with the gradient for p only.

    z is the gradient-blocked side. Per row, with hats denoting unit
    vectors, dL_i/dp_i = -(z_hat - (p_hat . z_hat) p_hat) / ||p||; the
    returned gradient is for the batch-mean scalar.
    """
    if p.shape != z.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {z.shape}")
    if p.ndim != 2 or p.shape[0] < 1:
        raise ValueError(f"expected a nonempty batch of rows, got shape {p.shape}")
    b = p.shape[0]
    p_norm = np.sqrt((p * p).sum(axis=1, keepdims=True)) + _EPS
    p_hat = p / p_norm
    z_hat = l2_normalize(z)
    cos = (p_hat * z_hat).sum(axis=1, keepdims=True)
    loss = float(-cos.mean())
    d_p = -(z_hat - cos * p_hat) / p_norm / b
    return loss, d_p.astype(p.dtype)


def symmetrized_loss(
    p1: np.ndarray, z2: np.ndarray, p2: np.ndarray, z1: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """0.5 * L(p1, z2) + 0.5 * L(p2, z1) and the two prediction gradients.

    p_k is the online prediction for view k, z_k the target projection for
    view k; the two terms swap the roles of the views.
    """
    l_a, d_p1 = cosine_loss(p1, z2)
    l_b, d_p2 = cosine_loss(p2, z1)
    return 0.5 * l_a + 0.5 * l_b, 0.5 * d_p1, 0.5 * d_p2


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean NLL under a softmax, numerically stable; returns dL/dlogits."""
    if logits.ndim != 2 or logits.shape[0] < 1:
        raise ValueError(f"expected (batch, classes) logits, got {logits.shape}")
    labels = np.asarray(labels)
    b, k = logits.shape
    if labels.shape != (b,):
        raise ValueError(f"labels shape {labels.shape} does not match batch {b}")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"label outside [0, {k})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    loss = float(-log_probs[np.arange(b), labels].mean())
    grad = np.exp(log_probs)
    grad[np.arange(b), labels] -= 1.0
    return loss, (grad / b).astype(logits.dtype)
