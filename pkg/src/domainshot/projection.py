"""The trainable embedding head: dense layer + ReLU + L2 normalisation.

Forward maps x -> h = relu(W x + b) -> r = h / max(|h|, norm_epsilon), so any
non-degenerate output lives on the unit sphere. If ReLU kills every component
the fallback branch emits the zero vector and contributes zero gradient.
All arithmetic is float64; checkpoints store float32.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import ProjectionCheckpoint
from .errors import ContractError, ValidationError
from .rng import stream


@dataclass
class ProjectionModel:
    W: np.ndarray  # (d, d) float64
    b: np.ndarray  # (d,) float64
    norm_epsilon: float = 1e-12
    version: int = field(default=0, compare=False)  # bumped by every SGD step

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    def copy(self) -> "ProjectionModel":
        return ProjectionModel(W=self.W.copy(), b=self.b.copy(), norm_epsilon=self.norm_epsilon)

    def to_checkpoint(self, metadata=None) -> ProjectionCheckpoint:
        return ProjectionCheckpoint(W=self.W, b=self.b, metadata=metadata or {})

    @classmethod
    def from_checkpoint(cls, ckpt: ProjectionCheckpoint) -> "ProjectionModel":
        ckpt.validate()
        return cls(W=ckpt.W.astype(np.float64), b=ckpt.b.astype(np.float64))


@dataclass(frozen=True)
class ForwardCache:
    x: np.ndarray     # (n, d) inputs
    pre: np.ndarray   # (n, d) W x + b
    h: np.ndarray     # (n, d) relu(pre)
    norm: np.ndarray  # (n,) |h|
    r: np.ndarray     # (n, d) output
    fallback: np.ndarray  # (n,) bool, True where |h| < norm_epsilon
    model_version: int


@dataclass(frozen=True)
class ProjectionGrads:
    dW: np.ndarray
    db: np.ndarray


def init_projection(dim: int, seed: int) -> ProjectionModel:
    """Uniform fan-in init: W ~ U(-sqrt(6/dim), sqrt(6/dim)), b = 0."""
    if dim <= 0:
        raise ValidationError(f"projection dim must be positive, got {dim}")
    bound = np.sqrt(6.0 / dim)
    rng = stream(seed, "projection-init")
    W = rng.uniform(-bound, bound, size=(dim, dim))
    return ProjectionModel(W=W, b=np.zeros(dim))


def forward(model: ProjectionModel, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Project x (shape (d,) or (n, d)) onto the unit sphere; returns (r, cache)."""
    single = np.ndim(x) == 1
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if X.shape[1] != model.dim:
        raise ValidationError(f"input dim {X.shape[1]} != model dim {model.dim}")
    pre = X @ model.W.T + model.b
    h = np.maximum(pre, 0.0)
    norm = np.linalg.norm(h, axis=1)
    fallback = norm < model.norm_epsilon
    safe = np.maximum(norm, model.norm_epsilon)
    r = h / safe[:, None]
    r[fallback] = 0.0  # degenerate activations emit the exact zero vector
    cache = ForwardCache(
        x=X, pre=pre, h=h, norm=norm, r=r, fallback=fallback, model_version=model.version
    )
    return (r[0] if single else r), cache


def backward(model: ProjectionModel, cache: ForwardCache, d_r: np.ndarray) -> ProjectionGrads:
    """Exact gradients of a scalar loss wrt W and b, given dL/dr.

    Through the normalisation: dL/dh = (dL/dr - (r . dL/dr) r) / |h|, zero on
    the fallback branch; through ReLU: mask by pre > 0; then dW = dL/dpre^T X.
    """
    if cache.model_version != model.version:
        raise ContractError("forward cache is stale: model parameters changed since forward()")
    d_r = np.atleast_2d(np.asarray(d_r, dtype=np.float64))
    if d_r.shape != cache.r.shape:
        raise ContractError(f"dL/dr shape {d_r.shape} does not match cached forward {cache.r.shape}")
    live = ~cache.fallback
    d_h = np.zeros_like(cache.h)
    if np.any(live):
        rr = cache.r[live]
        proj = np.sum(rr * d_r[live], axis=1, keepdims=True)
        d_h[live] = (d_r[live] - proj * rr) / cache.norm[live][:, None]
    d_pre = d_h * (cache.pre > 0)
    return ProjectionGrads(dW=d_pre.T @ cache.x, db=d_pre.sum(axis=0))


def sgd_step(model: ProjectionModel, grads: ProjectionGrads, lr: float) -> None:
    model.W -= lr * grads.dW
    model.b -= lr * grads.db
    model.version += 1
