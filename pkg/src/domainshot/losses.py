"""Episodic objectives over projected embeddings, with analytic gradients.

Three losses:

* prototypical: softmax over negative query-to-prototype distances,
* matching: attention over support dot products, summed per matching label,
* supervised contrastive: support anchors against same-class query positives,
  normalised over the whole query set at temperature tau.

All gradients are with respect to the projected support/query vectors; the
projection backward pass chains them to the parameters. Evaluation-time
classification is always nearest-prototype, whichever loss trained the model.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ValidationError

DISTANCES = ("euclidean", "squared-euclidean")

#: probability floor before the log in the matching loss
_PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LossConfig:
    distance: str = "euclidean"
    tau: float = 0.07

    def validate(self) -> "LossConfig":
        if self.distance not in DISTANCES:
            raise ValidationError(f"distance must be one of {DISTANCES}, got {self.distance!r}")
        if self.tau <= 0:
            raise ValidationError(f"tau must be positive, got {self.tau}")
        return self


@dataclass(frozen=True)
class EpisodeBatch:
    """Projected support/query vectors with their class labels."""

    support_r: np.ndarray  # (NS, d)
    support_y: np.ndarray  # (NS,)
    query_r: np.ndarray    # (NQ, d)
    query_y: np.ndarray    # (NQ,)

    def validate(self) -> "EpisodeBatch":
        for name, block in (("support", self.support_r), ("query", self.query_r)):
            norms = np.linalg.norm(block, axis=1)
            ok = (np.abs(norms - 1.0) <= 1e-9) | (norms == 0.0)
            if not np.all(ok):
                raise ValidationError(f"{name} vectors must be unit-norm or zero")
        if set(np.unique(self.query_y)) - set(np.unique(self.support_y)):
            raise ValidationError("query contains a class absent from the support set")
        return self


@dataclass(frozen=True)
class LossResult:
    loss: float
    d_query: np.ndarray    # dL / d query_r
    d_support: np.ndarray  # dL / d support_r


def prototypes(support_r: np.ndarray, support_y: np.ndarray, classes=None) -> dict[int, np.ndarray]:
    """Per-class mean of support vectors. Empty class -> ContractError."""
    support_y = np.asarray(support_y)
    if classes is None:
        classes = np.unique(support_y)
    out = {}
    for c in classes:
        mask = support_y == c
        if not np.any(mask):
            raise ContractError(f"class {c} has no support samples")
        out[int(c)] = support_r[mask].mean(axis=0)
    return out


def _proto_arrays(batch: EpisodeBatch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sorted classes, prototype matrix (C, d), per-class support counts."""
    classes = np.unique(batch.support_y)
    protos = np.empty((len(classes), batch.support_r.shape[1]))
    counts = np.empty(len(classes))
    for j, c in enumerate(classes):
        mask = batch.support_y == c
        counts[j] = mask.sum()
        protos[j] = batch.support_r[mask].mean(axis=0)
    return classes, protos, counts


def _distances(query_r: np.ndarray, protos: np.ndarray, distance: str):
    """Distance matrix (NQ, C) and its gradient wrt the difference vectors.

    Returns (dist, grad) with grad[q, j] = d dist[q, j] / d (r_q - c_j); the
    euclidean cusp at zero distance takes subgradient 0.
    """
    diffs = query_r[:, None, :] - protos[None, :, :]
    if distance == "euclidean":
        dist = np.linalg.norm(diffs, axis=2)
        safe = np.where(dist > 0, dist, 1.0)
        grad = diffs / safe[:, :, None]
        grad[dist == 0] = 0.0
    else:
        dist = np.sum(diffs * diffs, axis=2)
        grad = 2.0 * diffs
    return dist, grad


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def pn_loss(batch: EpisodeBatch, config: LossConfig = LossConfig()) -> LossResult:
    """Prototypical loss: cross-entropy of softmax(-distance to prototypes)."""
    config.validate()
    classes, protos, counts = _proto_arrays(batch)
    dist, dgrad = _distances(batch.query_r, protos, config.distance)
    p = _softmax(-dist)
    col = np.searchsorted(classes, batch.query_y)
    nq = len(batch.query_y)
    loss = -np.log(p[np.arange(nq), col]).mean()

    d_logits = p.copy()
    d_logits[np.arange(nq), col] -= 1.0
    d_logits /= nq                       # dL/d(-dist)
    d_dist = -d_logits                   # dL/d dist
    d_query = np.sum(d_dist[:, :, None] * dgrad, axis=1)
    d_proto = -np.sum(d_dist[:, :, None] * dgrad, axis=0)  # (C, d)
    d_support = np.zeros_like(batch.support_r)
    for j, c in enumerate(classes):
        mask = batch.support_y == c
        d_support[mask] = d_proto[j] / counts[j]
    return LossResult(loss=float(loss), d_query=d_query, d_support=d_support)


def mn_loss(batch: EpisodeBatch) -> LossResult:
    """Matching loss: attention over support similarities, summed per label."""
    logits = batch.query_r @ batch.support_r.T        # (NQ, NS)
    a = _softmax(logits)
    same = batch.query_y[:, None] == batch.support_y[None, :]
    p = np.sum(a * same, axis=1)
    if np.any(p < _PROB_FLOOR):
        warnings.warn("matching loss clamped a class probability at 1e-12")
        p = np.maximum(p, _PROB_FLOOR)
    nq = len(p)
    loss = -np.log(p).mean()

    d_a = -(same / p[:, None]) / nq                   # dL/da
    inner = np.sum(a * d_a, axis=1, keepdims=True)
    d_logits = a * (d_a - inner)
    d_query = d_logits @ batch.support_r
    d_support = d_logits.T @ batch.query_r
    return LossResult(loss=float(loss), d_query=d_query, d_support=d_support)


def sc_loss(batch: EpisodeBatch, config: LossConfig = LossConfig()) -> LossResult:
    """Supervised contrastive loss, anchors over S, positives/normaliser over Q.

    L = mean_s [ logsumexp_q(r_s.r_q / tau) - mean_{p in P_s}(r_s.r_p / tau) ],
    P_s the query samples sharing s's class. Log-sum-exp is computed with
    max-subtraction.
    """
    config.validate()
    pos = batch.support_y[:, None] == batch.query_y[None, :]   # (NS, NQ)
    n_pos = pos.sum(axis=1)
    if np.any(n_pos == 0):
        bad = batch.support_y[n_pos == 0][0]
        raise ContractError(f"support class {bad} has no positives in the query set")
    z = (batch.support_r @ batch.query_r.T) / config.tau
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    ns = len(batch.support_y)
    loss = float(np.mean(lse - np.sum(z * pos, axis=1) / n_pos))

    w = np.exp(z - lse[:, None])                               # softmax over Q
    d_z = (w - pos / n_pos[:, None]) / ns
    d_s_dot = d_z / config.tau                                 # dL/d(r_s . r_q)
    d_support = d_s_dot @ batch.query_r
    d_query = d_s_dot.T @ batch.support_r
    return LossResult(loss=loss, d_query=d_query, d_support=d_support)


def predict(batch: EpisodeBatch, config: LossConfig = LossConfig()) -> np.ndarray:
    """Nearest-prototype class per query; ties go to the smallest class id."""
    config.validate()
    classes, protos, _ = _proto_arrays(batch)
    dist, _ = _distances(batch.query_r, protos, config.distance)
    return classes[np.argmin(dist, axis=1)]


def episode_accuracy(batch: EpisodeBatch, config: LossConfig = LossConfig()) -> float:
    """Fraction of queries assigned their true class by the prototype predictor."""
    return float(np.mean(predict(batch, config) == batch.query_y))


LOSS_FUNCTIONS = {
    "pn": lambda batch, config: pn_loss(batch, config),
    "mn": lambda batch, config: mn_loss(batch),
    "sc": lambda batch, config: sc_loss(batch, config),
}
