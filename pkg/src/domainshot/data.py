"""Domain types shared by every module.

All types are immutable after construction (frozen dataclasses; numpy buffers
are flagged read-only), so they are safe to share across concurrent workers.
Validation is explicit: loaders call ``validate()`` after construction, tests
may build deliberately-invalid variants without tripping checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ValidationError

SPLITS = ("train", "valid", "test")

#: Cardinality of the domain-agnostic label set (low / high engagement).
NUM_BINARY_CLASSES = 2


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EmbeddingTable:
    """Per-window feature vectors keyed by (game_id, window_index).

    Vectors are stored as float32 (the on-disk precision); arithmetic
    downstream promotes to float64.
    """

    dim: int
    game_ids: np.ndarray       # (n,) uint32
    window_indices: np.ndarray  # (n,) uint32
    vectors: np.ndarray        # (n, dim) float32

    def __post_init__(self):
        object.__setattr__(self, "game_ids", _freeze(np.ascontiguousarray(self.game_ids, dtype=np.uint32)))
        object.__setattr__(self, "window_indices", _freeze(np.ascontiguousarray(self.window_indices, dtype=np.uint32)))
        object.__setattr__(self, "vectors", _freeze(np.ascontiguousarray(self.vectors, dtype=np.float32)))

    def __len__(self) -> int:
        return len(self.game_ids)

    @classmethod
    def from_records(cls, dim: int, records) -> "EmbeddingTable":
        """Build from an iterable of (game_id, window_index, vector) triples."""
        records = list(records)
        gids = np.array([r[0] for r in records], dtype=np.uint32)
        wins = np.array([r[1] for r in records], dtype=np.uint32)
        vecs = np.array([r[2] for r in records], dtype=np.float32).reshape(len(records), dim)
        return cls(dim=dim, game_ids=gids, window_indices=wins, vectors=vecs)

    def validate(self) -> "EmbeddingTable":
        if self.dim <= 0:
            raise ValidationError(f"embedding dim must be positive, got {self.dim}")
        if self.vectors.shape != (len(self.game_ids), self.dim):
            raise ValidationError(
                f"vector block shape {self.vectors.shape} does not match "
                f"{len(self.game_ids)} records of dim {self.dim}"
            )
        if len(self.window_indices) != len(self.game_ids):
            raise ValidationError("game_ids and window_indices length mismatch")
        if not np.all(np.isfinite(self.vectors)):
            raise ValidationError("embedding vectors contain non-finite values")
        keys = set(zip(self.game_ids.tolist(), self.window_indices.tolist()))
        if len(keys) != len(self.game_ids):
            raise ValidationError("duplicate (game_id, window_index) pair in embedding table")
        return self

    def index(self) -> dict[tuple[int, int], int]:
        """(game_id, window_index) -> row number."""
        return {
            (int(g), int(w)): i
            for i, (g, w) in enumerate(zip(self.game_ids, self.window_indices))
        }


@dataclass(frozen=True)
class GameEntry:
    game_id: int
    name: str
    split: str  # one of SPLITS


@dataclass(frozen=True)
class LabelingDefaults:
    """The labelling knobs a manifest pins for its subcorpus."""

    epsilon: float
    min_samples_per_class: int


@dataclass(frozen=True)
class ManifestPaths:
    embeddings: str
    traces: str


@dataclass(frozen=True)
class Manifest:
    """Per-subcorpus game-to-split assignment plus labelling defaults.

    ``metadata`` is free-form provenance: the synth generator records its
    ground-truth statistics there, the prepare pipeline records the subcorpus
    median engagement (key ``subcorpus_median``) so loaders can re-check the
    binarisation rule.
    """

    subcorpus_id: str
    games: tuple[GameEntry, ...]
    labeling: LabelingDefaults
    paths: ManifestPaths
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "games", tuple(self.games))

    def validate(self) -> "Manifest":
        seen = set()
        for g in self.games:
            if g.game_id in seen:
                raise ValidationError(f"duplicate game_id {g.game_id} in manifest")
            seen.add(g.game_id)
            if g.split not in SPLITS:
                raise ValidationError(f"unknown split {g.split!r} for game {g.game_id}")
            if g.game_id < 0:
                raise ValidationError(f"negative game_id {g.game_id}")
        if not (0 <= self.labeling.epsilon < 0.5):
            raise ValidationError(f"epsilon must lie in [0, 0.5), got {self.labeling.epsilon}")
        if self.labeling.min_samples_per_class <= 0:
            raise ValidationError("min_samples_per_class must be positive")
        return self

    def split_of(self) -> dict[int, str]:
        return {g.game_id: g.split for g in self.games}


@dataclass(frozen=True)
class LabeledSample:
    """One 1-second window: binary label, per-game class, and feature vector."""

    game_id: int
    window_index: int
    engagement_mean: float
    y_binary: int
    y_class: int
    vector: np.ndarray  # (dim,) float32

    def __post_init__(self):
        object.__setattr__(self, "vector", _freeze(np.ascontiguousarray(self.vector, dtype=np.float32)))


@dataclass(frozen=True)
class LabeledDataset:
    manifest: Manifest
    samples: tuple[LabeledSample, ...]
    subcorpus_median: float

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))

    def validate(self) -> "LabeledDataset":
        self.manifest.validate()
        eps = self.manifest.labeling.epsilon
        split_of = self.manifest.split_of()
        class_owner: dict[int, int] = {}
        counts: dict[tuple[int, int], int] = {}
        for s in self.samples:
            if s.y_binary not in (0, 1):
                raise ValidationError(f"y_binary must be 0 or 1, got {s.y_binary}")
            if s.y_class != NUM_BINARY_CLASSES * s.game_id + s.y_binary:
                raise ValidationError(
                    f"y_class {s.y_class} != 2*{s.game_id}+{s.y_binary} for "
                    f"window ({s.game_id}, {s.window_index})"
                )
            if s.game_id not in split_of:
                raise ValidationError(f"sample references game {s.game_id} absent from manifest")
            owner = class_owner.setdefault(s.y_class, s.game_id)
            if owner != s.game_id:
                raise ValidationError(f"class {s.y_class} appears under games {owner} and {s.game_id}")
            if abs(s.engagement_mean - self.subcorpus_median) <= eps:
                raise ValidationError(
                    f"sample ({s.game_id}, {s.window_index}) lies inside the "
                    f"epsilon dead zone around the subcorpus median"
                )
            expected = 1 if s.engagement_mean > self.subcorpus_median else 0
            if s.y_binary != expected:
                raise ValidationError(
                    f"sample ({s.game_id}, {s.window_index}) y_binary={s.y_binary} "
                    f"inconsistent with engagement_mean={s.engagement_mean} vs "
                    f"median={self.subcorpus_median}"
                )
            counts[(s.game_id, s.y_binary)] = counts.get((s.game_id, s.y_binary), 0) + 1
        retained_games = {s.game_id for s in self.samples}
        need = self.manifest.labeling.min_samples_per_class
        for gid in retained_games:
            for y in (0, 1):
                if counts.get((gid, y), 0) < need:
                    raise ValidationError(
                        f"game {gid} has {counts.get((gid, y), 0)} samples of class "
                        f"y={y}, below the minimum {need}"
                    )
        return self

    def sample_indices_for_split(self, split: str) -> np.ndarray:
        split_of = self.manifest.split_of()
        return np.array(
            [i for i, s in enumerate(self.samples) if split_of[s.game_id] == split],
            dtype=np.int64,
        )

    def vectors(self) -> np.ndarray:
        """All sample vectors stacked, float64, shape (n, dim)."""
        return np.stack([s.vector for s in self.samples]).astype(np.float64)


@dataclass(frozen=True)
class BaselineCheckpoint:
    """Projection head plus the 2-class linear classifier of the baseline."""

    W: np.ndarray  # (d, d) float32
    b: np.ndarray  # (d,) float32
    V: np.ndarray  # (2, d) float32
    c: np.ndarray  # (2,) float32
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        for name in ("W", "b", "V", "c"):
            object.__setattr__(self, name, _freeze(np.ascontiguousarray(getattr(self, name), dtype=np.float32)))

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    def validate(self) -> "BaselineCheckpoint":
        d = self.dim
        if self.W.shape != (d, d) or d <= 0:
            raise ValidationError(f"baseline projection must be square, got {self.W.shape}")
        if self.b.shape != (d,) or self.V.shape != (2, d) or self.c.shape != (2,):
            raise ValidationError("baseline checkpoint has mismatched parameter shapes")
        for name in ("W", "b", "V", "c"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValidationError(f"baseline checkpoint field {name} contains non-finite values")
        return self


@dataclass(frozen=True)
class ProjectionCheckpoint:
    """Serialisable snapshot of the trained projection head (float32 on disk)."""

    W: np.ndarray  # (d_out, d_in) float32 row-major
    b: np.ndarray  # (d_out,) float32
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "W", _freeze(np.ascontiguousarray(self.W, dtype=np.float32)))
        object.__setattr__(self, "b", _freeze(np.ascontiguousarray(self.b, dtype=np.float32)))

    @property
    def d_out(self) -> int:
        return self.W.shape[0]

    @property
    def d_in(self) -> int:
        return self.W.shape[1]

    def validate(self) -> "ProjectionCheckpoint":
        if self.W.ndim != 2 or self.d_in <= 0 or self.d_out <= 0:
            raise ValidationError(f"weight matrix has invalid shape {self.W.shape}")
        if self.d_in != self.d_out:
            raise ValidationError(
                f"projection must be square (d_in == d_out), got {self.W.shape}"
            )
        if self.b.shape != (self.d_out,):
            raise ValidationError(f"bias shape {self.b.shape} does not match d_out {self.d_out}")
        if not (np.all(np.isfinite(self.W)) and np.all(np.isfinite(self.b))):
            raise ValidationError("checkpoint contains non-finite parameters")
        return self
