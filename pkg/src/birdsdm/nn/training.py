"""Mini-batch training loop, prediction, and the training log."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from ..errors import DataError, NumericError
from ..features import draw_flips, flip_array
from .losses import per_hotspot_cross_entropy, weighted_loss
from .model import Model
from .optim import Adam, ReduceLROnPlateau
from .tensor import _sigmoid

log = logging.getLogger(__name__)

LOSS_WEIGHTS = ("none", "identity", "log", "sqrt")


@dataclass
class TrainConfig:
    batch_size: int = 64
    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    plateau_factor: float = 0.5
    plateau_patience: int = 5
    plateau_threshold: float = 1e-5
    min_lr: float = 1e-6
    epochs: int = 10
    seed: int = 0
    loss_weight: str = "none"
    augment: bool = True

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 0:
            raise DataError("batch_size must be >= 1 and epochs >= 0")
        if self.learning_rate <= 0 or self.min_lr <= 0:
            raise DataError("learning rates must be positive")
        if not 0 < self.plateau_factor < 1:
            raise DataError("plateau factor must lie in (0, 1)")
        if self.loss_weight not in LOSS_WEIGHTS:
            raise DataError(f"loss_weight must be one of {LOSS_WEIGHTS}")


@dataclass
class Dataset:
    """Aligned arrays: patches ``[N, C, H, W]``, rescaled locations
    ``[N, 2]`` (or None), targets ``[N, n_species]``, checklist counts ``[N]``."""

    x: np.ndarray
    y: np.ndarray
    loc: np.ndarray | None = None
    n_checklists: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.x)
        for name in ("y", "loc", "n_checklists"):
            arr = getattr(self, name)
            if arr is not None and len(arr) != n:
                raise DataError(f"dataset field {name} has {len(arr)} rows, expected {n}")

    def __len__(self):
        return len(self.x)

    def batch(self, idx):
        return (self.x[idx], None if self.loc is None else self.loc[idx], self.y[idx],
                None if self.n_checklists is None else self.n_checklists[idx])


def _augment(x, rng):
    out = np.empty_like(x)
    for i in range(len(x)):
        out[i] = flip_array(x[i], *draw_flips(rng))
    return out


def evaluate_loss(model: Model, data: Dataset, batch_size: int = 256) -> float:
    """Unweighted mean cross-entropy in eval mode."""
    if len(data) == 0:
        return float("nan")
    total = 0.0
    for start in range(0, len(data), batch_size):
        idx = np.arange(start, min(len(data), start + batch_size))
        x, loc, y, _ = data.batch(idx)
        total += float(per_hotspot_cross_entropy(model.logits(x, loc), y).data.sum())
    return total / len(data)


def train(model: Model, data: Dataset, config: TrainConfig, val: Dataset | None = None):
    """Train ``model`` in place with Adam and plateau lr decay.

    One ``numpy`` generator seeded with ``config.seed`` drives shuffling,
    flips and dropout, so a run is reproducible bit for bit. Returns
    ``(model, log)`` with one ``{epoch, train_loss, val_loss, lr}`` per epoch.
    """
    if len(data) == 0:
        raise DataError("empty training set")
    rng = np.random.default_rng(config.seed)
    opt = Adam(model.parameters(), config.learning_rate, (config.beta1, config.beta2), config.eps)
    sched = ReduceLROnPlateau(opt, config.plateau_factor, config.plateau_patience,
                              config.min_lr, config.plateau_threshold)
    history = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(data))
        running = 0.0
        lr = opt.lr
        for start in range(0, len(data), config.batch_size):
            idx = order[start:start + config.batch_size]
            x, loc, y, n_h = data.batch(idx)
            if config.augment:
                x = _augment(x, rng)
            opt.zero_grad()
            per_h = per_hotspot_cross_entropy(model.logits(x, loc, training=True, rng=rng), y)
            loss = weighted_loss(per_h, n_h if config.loss_weight != "none" else None, config.loss_weight)
            value = float(loss.data)
            if not np.isfinite(value):
                raise NumericError(f"non-finite training loss at epoch {epoch}, batch starting {start}")
            loss.backward()
            opt.step()
            running += value * len(idx)
        train_loss = running / len(data)
        val_loss = evaluate_loss(model, val) if val is not None and len(val) else train_loss
        if not np.isfinite(val_loss):
            raise NumericError(f"non-finite validation loss at epoch {epoch}")
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss, "lr": lr})
        log.info("epoch %d train %.6f val %.6f lr %.3g", epoch, train_loss, val_loss, lr)
        sched.step(val_loss)
    return model, history


def predict(model: Model, x, loc=None, batch_size: int = 256) -> np.ndarray:
    """Encounter-rate predictions, one row per input, in eval mode."""
    x = np.asarray(x)
    rows = []
    for start in range(0, len(x), batch_size):
        sl = slice(start, start + batch_size)
        rows.append(_sigmoid(model.logits(x[sl], None if loc is None else loc[sl]).data))
    if not rows:
        return np.zeros((0, model.descriptor.n_species))
    return np.concatenate(rows)


def write_train_log(path, history):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss", "lr"])
        for row in history:
            w.writerow([row["epoch"], repr(row["train_loss"]), repr(row["val_loss"]), repr(row["lr"])])
