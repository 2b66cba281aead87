"""Soft-label cross-entropy and checklist-count weighting."""
import numpy as np

from ..errors import DataError
from .tensor import Tensor, sigmoid_cross_entropy

WEIGHT_FUNCTIONS = {
    "identity": lambda n: n,
    "log": np.log1p,
    "sqrt": np.sqrt,
}


def loss_weights(n_checklists, f: str | None) -> np.ndarray:
    """Per-hotspot weights ``f(n_h)`` rescaled to mean 1 over the batch.

    ``f`` is one of ``identity``, ``log`` (``ln(1 + n)``), ``sqrt``, or
    ``None``/``"none"`` for uniform weights.
    """
    n = np.asarray(n_checklists, dtype=np.float64)
    if f is None or f == "none":
        return np.ones_like(n)
    if f not in WEIGHT_FUNCTIONS:
        raise DataError(f"unknown loss weight function {f!r}")
    if np.any(n < 1):
        raise DataError("checklist counts must be >= 1")
    raw = WEIGHT_FUNCTIONS[f](n)
    # equal counts give exactly unit weights, so weighted training reduces
    # bit-for-bit to the unweighted case
    if np.all(raw == raw[0]):
        return np.ones_like(n)
    return raw / raw.mean()


def per_hotspot_cross_entropy(logits: Tensor, target) -> Tensor:
    return sigmoid_cross_entropy(logits, np.asarray(target, dtype=np.float64))


def weighted_loss(per_hotspot: Tensor, n_checklists=None, f: str | None = None) -> Tensor:
    """``mean_h(w_h * L_h)`` with ``w_h`` from :func:`loss_weights`."""
    batch = per_hotspot.shape[0]
    w = np.ones(batch) if n_checklists is None else loss_weights(n_checklists, f)
    return (per_hotspot * w).sum() * (1.0 / batch)


def cross_entropy_loss(logits: Tensor, target) -> Tensor:
    """Mean over hotspots of the per-hotspot summed species cross-entropy."""
    return weighted_loss(per_hotspot_cross_entropy(logits, target))


def cross_entropy(pred, target):
    """Cross-entropy of probabilities ``pred`` against soft labels.

    Returns ``(loss, grad)`` where ``grad`` is the gradient with respect to
    the logits of ``pred``, i.e. ``(pred - target) / batch``.
    """
    pred = np.asarray(pred, dtype=np.float64)
    if np.any(pred <= 0) or np.any(pred >= 1):
        raise DataError("predictions must lie strictly inside (0, 1)")
    z = Tensor(np.log(pred) - np.log1p(-pred), requires_grad=True)
    loss = cross_entropy_loss(z, target)
    loss.backward()
    return float(loss.data), z.grad
