"""Loss functions returning (scalar loss, gradient w.r.t. the prediction)."""
from __future__ import annotations

import numpy as np

__all__ = ["softmax_cross_entropy", "mse_loss"]


def softmax_cross_entropy(
    logits: np.ndarray, target_class: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean cross entropy of row-wise softmax against integer class targets.

    Returns loss = mean_i(-log softmax(logits_i)[target_i]) and the gradient
    (softmax - onehot) / N.
    """
    if logits.ndim != 2:
        raise ValueError(f"logits must be (N, C), got shape {logits.shape}")
    n, c = logits.shape
    target_class = np.asarray(target_class)
    if target_class.shape != (n,):
        raise ValueError(f"target_class must be shape ({n},), got {target_class.shape}")
    if target_class.min() < 0 or target_class.max() >= c:
        raise ValueError(
            f"class index out of range [0, {c}): "
            f"min={target_class.min()} max={target_class.max()}"
        )
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    rows = np.arange(n)
    logp = shifted[rows, target_class] - np.log(exp.sum(axis=1))
    loss = float(-logp.sum(dtype=np.float64) / n)
    grad = probs.copy()
    grad[rows, target_class] -= 1.0
    grad /= n
    return loss, grad.astype(logits.dtype)


def mse_loss(
    pred: np.ndarray, target: np.ndarray, mask: np.ndarray | None = None
) -> tuple[float, np.ndarray]:
    """Mean squared error over selected elements.

    ``mask`` selects which elements contribute (used to train only the Q
    output of the action actually taken); gradient is 2*(pred-target)/count
    on selected elements and exactly zero elsewhere.
    """
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    if mask is None:
        sel = np.ones(pred.shape, dtype=bool)
    else:
        sel = np.asarray(mask, dtype=bool)
        if sel.shape != pred.shape:
            raise ValueError(f"mask shape {sel.shape} != pred shape {pred.shape}")
    count = int(sel.sum())
    if count == 0:
        raise ValueError("mse_loss: empty selection")
    diff = np.where(sel, pred - target, 0.0)
    loss = float(np.sum(diff.astype(np.float64) ** 2) / count)
    grad = (2.0 * diff / count).astype(pred.dtype)
    return loss, grad
