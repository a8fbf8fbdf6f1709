"""N-way K-shot episode sampling, deterministic under a seed.

Episode i of a (seed, split) pair draws from the Philox stream keyed by
``hash(seed, split, i)`` (see :mod:`domainshot.rng`): first the N classes, as
a partial Fisher-Yates draw over the eligible classes sorted ascending, then
per class K+Q sample rows (dataset order), the first K forming the support
set and the next Q the query set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SPLITS, LabeledDataset
from .errors import SamplerError, ValidationError
from .rng import choice_without_replacement, stream


@dataclass(frozen=True)
class EpisodeSpec:
    n_way: int
    k_shot: int
    q_query: int = 5
    split: str = "train"
    seed: int = 0

    def validate(self) -> "EpisodeSpec":
        if self.n_way < 2:
            raise ValidationError(f"n_way must be >= 2, got {self.n_way}")
        if self.k_shot < 1 or self.q_query < 1:
            raise ValidationError("k_shot and q_query must be >= 1")
        if self.split not in SPLITS:
            raise ValidationError(f"unknown split {self.split!r}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        return self


@dataclass(frozen=True)
class Episode:
    """Support/query vectors (float64) with their y_class labels."""

    classes: np.ndarray    # (N,) the sampled y_class values, in draw order
    support_x: np.ndarray  # (N*K, d)
    support_y: np.ndarray  # (N*K,)
    query_x: np.ndarray    # (N*Q, d)
    query_y: np.ndarray    # (N*Q,)


def eligible_classes(dataset: LabeledDataset, split: str, k_shot: int, q_query: int) -> list[int]:
    """Classes in the split with at least k_shot + q_query samples."""
    split_of = dataset.manifest.split_of()
    counts: dict[int, int] = {}
    for s in dataset.samples:
        if split_of[s.game_id] == split:
            counts[s.y_class] = counts.get(s.y_class, 0) + 1
    need = k_shot + q_query
    return sorted(c for c, n in counts.items() if n >= need)


class EpisodeSampler:
    """Caches the per-class row index for one (dataset, spec) pair."""

    def __init__(self, dataset: LabeledDataset, spec: EpisodeSpec):
        spec.validate()
        self.spec = spec
        split_of = dataset.manifest.split_of()
        labels = np.array([s.y_class for s in dataset.samples], dtype=np.int64)
        self._labels = labels
        rows_by_class: dict[int, list[int]] = {}
        for i, s in enumerate(dataset.samples):
            if split_of[s.game_id] == spec.split:
                rows_by_class.setdefault(int(labels[i]), []).append(i)
        need = spec.k_shot + spec.q_query
        self._rows = {
            c: np.array(r, dtype=np.int64) for c, r in rows_by_class.items() if len(r) >= need
        }
        self._eligible = np.array(sorted(self._rows), dtype=np.int64)
        if len(self._eligible) < spec.n_way:
            raise SamplerError(
                f"split {spec.split!r} has {len(self._eligible)} classes with >= "
                f"{need} samples; {spec.n_way}-way episodes need {spec.n_way}"
            )
        self._x = dataset.vectors()

    def sample(self, episode_index: int) -> Episode:
        spec = self.spec
        rng = stream(spec.seed, spec.split, episode_index)
        classes = choice_without_replacement(rng, self._eligible, spec.n_way)
        sup_rows, qry_rows = [], []
        for c in classes:
            picked = choice_without_replacement(rng, self._rows[int(c)], spec.k_shot + spec.q_query)
            sup_rows.extend(picked[: spec.k_shot])
            qry_rows.extend(picked[spec.k_shot :])
        sup_rows = np.array(sup_rows, dtype=np.int64)
        qry_rows = np.array(qry_rows, dtype=np.int64)
        return Episode(
            classes=classes,
            support_x=self._x[sup_rows],
            support_y=self._labels[sup_rows],
            query_x=self._x[qry_rows],
            query_y=self._labels[qry_rows],
        )


def sample_episode(dataset: LabeledDataset, spec: EpisodeSpec, episode_index: int) -> Episode:
    """One-shot convenience wrapper; reuse :class:`EpisodeSampler` in loops."""
    return EpisodeSampler(dataset, spec).sample(episode_index)
