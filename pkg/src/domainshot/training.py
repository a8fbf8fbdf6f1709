"""Episode-loop training of the projection head.

Schedule and stopping follow the shared protocol: plain SGD, learning rate
halved every 5 epochs, early stopping after ``patience_epochs`` epochs without
validation-accuracy improvement, best-validation checkpoint returned.
Validation episodes are a fixed seeded set, identical across epochs, scored
with the nearest-prototype predictor regardless of the training objective.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .data import LabeledDataset, ProjectionCheckpoint
from .episodes import Episode, EpisodeSampler, EpisodeSpec
from .errors import TrainError, ValidationError
from .formats import canonical_json
from .losses import LOSS_FUNCTIONS, EpisodeBatch, LossConfig, episode_accuracy
from .projection import ProjectionModel, backward, forward, init_projection, sgd_step

METHODS = ("pn", "mn", "sc", "baseline")

LR_RANGE = (1e-3, 1e-2)  # open interval, per the training protocol


@dataclass(frozen=True)
class TrainConfig:
    method: str
    spec: EpisodeSpec
    loss: LossConfig = field(default_factory=LossConfig)
    lr0: float = 5e-3
    episodes_per_epoch: int = 20
    lr_halve_every_epochs: int = 5
    patience_epochs: int = 10
    max_epochs: int = 200
    val_episodes_per_epoch: int = 20
    batch_size: int = 32  # baseline mini-batches only
    seed: int = 0
    allow_lr_outside_range: bool = False

    def validate(self) -> "TrainConfig":
        if self.method not in METHODS:
            raise ValidationError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.allow_lr_outside_range and not (LR_RANGE[0] < self.lr0 < LR_RANGE[1]):
            raise ValidationError("lr outside (1e-3,1e-2); pass --allow-lr to override")
        if self.lr0 < 0:
            raise ValidationError("learning rate must be non-negative")
        if self.patience_epochs < 1:
            raise ValidationError("patience_epochs must be >= 1")
        if self.max_epochs < 1 or self.episodes_per_epoch < 1 or self.val_episodes_per_epoch < 1:
            raise ValidationError("epoch and episode counts must be >= 1")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.lr_halve_every_epochs < 1:
            raise ValidationError("lr_halve_every_epochs must be >= 1")
        self.spec.validate()
        self.loss.validate()
        return self

    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(asdict(self)).encode()).hexdigest()[:16]


def lr_at(epoch: int, config: TrainConfig) -> float:
    """lr0 halved once per ``lr_halve_every_epochs`` completed epochs."""
    return config.lr0 * 0.5 ** (epoch // config.lr_halve_every_epochs)


@dataclass(frozen=True)
class EpochEntry:
    epoch: int
    train_loss: float
    val_accuracy: float
    lr: float


@dataclass(frozen=True)
class TrainLog:
    method: str
    entries: tuple[EpochEntry, ...]
    best_epoch: int
    best_val_accuracy: float
    sgd_steps: int
    config_hash: str

    @property
    def epochs_run(self) -> int:
        return len(self.entries)

    def to_payload(self) -> dict:
        return {
            "method": self.method,
            "epochs": [
                {"epoch": e.epoch, "train_loss": e.train_loss, "val_accuracy": e.val_accuracy, "lr": e.lr}
                for e in self.entries
            ],
            "best_epoch": self.best_epoch,
            "best_val_accuracy": self.best_val_accuracy,
            "sgd_steps": self.sgd_steps,
            "config_hash": self.config_hash,
        }


def project_episode(model: ProjectionModel, episode: Episode):
    """Forward S and Q through the head in one batch; returns (batch, cache)."""
    X = np.concatenate([episode.support_x, episode.query_x], axis=0)
    R, cache = forward(model, X)
    ns = len(episode.support_y)
    batch = EpisodeBatch(
        support_r=R[:ns],
        support_y=episode.support_y,
        query_r=R[ns:],
        query_y=episode.query_y,
    )
    return batch, cache


def validation_accuracy(model: ProjectionModel, sampler: EpisodeSampler, n_episodes: int,
                        loss_config: LossConfig) -> float:
    accs = []
    for j in range(n_episodes):
        batch, _ = project_episode(model, sampler.sample(j))
        accs.append(episode_accuracy(batch, loss_config))
    return float(np.mean(accs))


def train_fsl(dataset: LabeledDataset, config: TrainConfig) -> tuple[ProjectionCheckpoint, TrainLog]:
    """Train the projection head with the configured episodic objective.

    Returns the checkpoint of the epoch with the best validation accuracy
    (earliest epoch on ties) and the per-epoch log.
    """
    config.validate()
    if config.method == "baseline":
        raise ValidationError("method 'baseline' trains via baseline.train_baseline")
    loss_fn = LOSS_FUNCTIONS[config.method]

    train_spec = replace(config.spec, split="train", seed=config.seed)
    val_spec = replace(config.spec, split="valid", seed=config.seed)
    train_sampler = EpisodeSampler(dataset, train_spec)  # SamplerError here if infeasible
    val_sampler = EpisodeSampler(dataset, val_spec)

    dim = dataset.samples[0].vector.shape[0]
    model = init_projection(dim, config.seed)

    best_acc = -np.inf
    best_epoch = -1
    best_model = model.copy()
    stale_epochs = 0
    entries: list[EpochEntry] = []

    for epoch in range(config.max_epochs):
        lr = lr_at(epoch, config)
        epoch_losses = []
        for j in range(config.episodes_per_epoch):
            episode_index = epoch * config.episodes_per_epoch + j
            batch, cache = project_episode(model, train_sampler.sample(episode_index))
            result = loss_fn(batch, config.loss)
            if not np.isfinite(result.loss):
                raise TrainError(
                    f"non-finite {config.method} loss at epoch {epoch}, episode {episode_index}"
                )
            d_r = np.concatenate([result.d_support, result.d_query], axis=0)
            sgd_step(model, backward(model, cache, d_r), lr)
            epoch_losses.append(result.loss)

        val_acc = validation_accuracy(model, val_sampler, config.val_episodes_per_epoch, config.loss)
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
        method=config.method,
        entries=tuple(entries),
        best_epoch=best_epoch,
        best_val_accuracy=float(best_acc),
        sgd_steps=model.version,
        config_hash=config.config_hash(),
    )
    ckpt = best_model.to_checkpoint(
        metadata={"seed": config.seed, "method": config.method, "config_hash": log.config_hash}
    )
    return ckpt, log
