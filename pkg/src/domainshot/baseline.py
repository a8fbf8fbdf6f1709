"""Conventional end-to-end baseline: projection head + 2-class softmax.

Trained with cross-entropy on the binary game-agnostic labels, mini-batch SGD
under the shared schedule, early stopping on validation binary accuracy. Its
reported number is plain binary accuracy on a split, independent of any
episode spec, so it repeats unchanged across way/shot cells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import BaselineCheckpoint, LabeledDataset
from .errors import TrainError, ValidationError
from .projection import (
    ProjectionGrads,
    ProjectionModel,
    backward,
    forward,
    init_projection,
    sgd_step,
)
from .rng import choice_without_replacement, stream
from .training import EpochEntry, TrainConfig, TrainLog, lr_at


@dataclass
class BaselineModel:
    projection: ProjectionModel
    V: np.ndarray  # (2, d) classifier head
    c: np.ndarray  # (2,)

    def copy(self) -> "BaselineModel":
        return BaselineModel(projection=self.projection.copy(), V=self.V.copy(), c=self.c.copy())

    def to_checkpoint(self, metadata=None) -> BaselineCheckpoint:
        return BaselineCheckpoint(
            W=self.projection.W, b=self.projection.b, V=self.V, c=self.c, metadata=metadata or {}
        )

    @classmethod
    def from_checkpoint(cls, ckpt: BaselineCheckpoint) -> "BaselineModel":
        ckpt.validate()
        return cls(
            projection=ProjectionModel(W=ckpt.W.astype(np.float64), b=ckpt.b.astype(np.float64)),
            V=ckpt.V.astype(np.float64),
            c=ckpt.c.astype(np.float64),
        )


@dataclass(frozen=True)
class BaselineGrads:
    dV: np.ndarray
    dc: np.ndarray
    dW: np.ndarray
    db: np.ndarray


def init_baseline(dim: int, seed: int) -> BaselineModel:
    projection = init_projection(dim, seed)
    bound = np.sqrt(6.0 / dim)
    rng = stream(seed, "baseline-head-init")
    V = rng.uniform(-bound, bound, size=(2, dim))
    return BaselineModel(projection=projection, V=V, c=np.zeros(2))


def _logits(model: BaselineModel, X: np.ndarray):
    R, cache = forward(model.projection, np.atleast_2d(X))
    return R @ model.V.T + model.c, R, cache


def ce_loss(model: BaselineModel, X: np.ndarray, y_binary: np.ndarray) -> tuple[float, BaselineGrads]:
    """Mean cross-entropy of softmax(V r + c) vs the binary labels.

    Gradients flow through the head and the full projection.
    """
    y = np.asarray(y_binary, dtype=np.int64)
    if len(y) == 0:
        raise ValidationError("ce_loss needs a non-empty batch")
    logits, R, cache = _logits(model, X)
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    n = len(y)
    loss = float(-np.log(p[np.arange(n), y]).mean())

    d_logits = p.copy()
    d_logits[np.arange(n), y] -= 1.0
    d_logits /= n
    dV = d_logits.T @ R
    dc = d_logits.sum(axis=0)
    d_r = d_logits @ model.V
    pg = backward(model.projection, cache, d_r)
    return loss, BaselineGrads(dV=dV, dc=dc, dW=pg.dW, db=pg.db)


def eval_binary(model: BaselineModel, dataset: LabeledDataset, split: str) -> float:
    """Binary accuracy over a split; no episodes involved."""
    rows = dataset.sample_indices_for_split(split)
    if len(rows) == 0:
        raise ValidationError(f"split {split!r} is empty")
    X = dataset.vectors()[rows]
    y = np.array([dataset.samples[i].y_binary for i in rows])
    logits, _, _ = _logits(model, X)
    return float(np.mean(np.argmax(logits, axis=1) == y))


def train_baseline(dataset: LabeledDataset, config: TrainConfig) -> tuple[BaselineModel, TrainLog]:
    """Mini-batch SGD over the train split's binary labels.

    Shuffling per epoch uses the documented Fisher-Yates draw from the stream
    (seed, "baseline-shuffle", epoch). Early stopping mirrors the episodic
    trainer: patience on validation binary accuracy, best model returned.
    """
    config.validate()
    rows = dataset.sample_indices_for_split("train")
    if len(rows) == 0:
        raise ValidationError("train split is empty")
    if len(dataset.sample_indices_for_split("valid")) == 0:
        raise ValidationError("valid split is empty")
    X_all = dataset.vectors()[rows]
    y_all = np.array([dataset.samples[i].y_binary for i in rows])

    model = init_baseline(X_all.shape[1], config.seed)
    best_acc = -np.inf
    best_epoch = -1
    best_model = model.copy()
    stale_epochs = 0
    entries: list[EpochEntry] = []

    n = len(rows)
    steps = 0
    for epoch in range(config.max_epochs):
        lr = lr_at(epoch, config)
        order = choice_without_replacement(
            stream(config.seed, "baseline-shuffle", epoch), np.arange(n), n
        )
        epoch_losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = ce_loss(model, X_all[idx], y_all[idx])
            if not np.isfinite(loss):
                raise TrainError(f"non-finite cross-entropy at epoch {epoch}, step {steps}")
            model.V -= lr * grads.dV
            model.c -= lr * grads.dc
            sgd_step(model.projection, ProjectionGrads(dW=grads.dW, db=grads.db), lr)
            steps += 1
            epoch_losses.append(loss)

        val_acc = eval_binary(model, dataset, "valid")
        entries.append(
            EpochEntry(epoch=epoch, train_loss=float(np.mean(epoch_losses)), val_accuracy=val_acc, lr=lr)
        )
        if val_acc > best_acc:
            best_acc = val_acc
            best_epoch = epoch
            best_model = model.copy()
            stale_epochs = 0
        else:
            stale_epochs += 1
        if stale_epochs >= config.patience_epochs:
            break

    log = TrainLog(
        method="baseline",
        entries=tuple(entries),
        best_epoch=best_epoch,
        best_val_accuracy=float(best_acc),
        sgd_steps=steps,
        config_hash=config.config_hash(),
    )
    return best_model, log
