"""Synthetic multidomain datasets with controllable geometry.

Each domain gets two class centers on the unit sphere separated by an exact
chord ``inter_class_gap``: a domain anchor drawn in the subspace orthogonal
to one global class axis, then tilted by +/- arcsin(gap/2) along that axis.
With ``flip_fraction = 0`` the global axis linearly separates the pooled
binary labels; flipping swaps the label-to-center assignment of the first
ceil(flip_fraction * n_domains) domains, which (at 0.5, balanced classes)
caps any fixed pooled binary classifier at 50% expected accuracy while every
domain stays separable by its own two centers.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .data import (
    EmbeddingTable,
    GameEntry,
    LabeledDataset,
    LabeledSample,
    LabelingDefaults,
    Manifest,
    ManifestPaths,
)
from .errors import ValidationError
from .labeling import relabel
from .rng import stream

#: synthetic engagement means are generated around this subcorpus median
SYNTH_MEDIAN = 0.5


@dataclass(frozen=True)
class SynthConfig:
    n_domains: int = 12
    samples_per_class: int = 30
    dim: int = 16
    cluster_spread: float = 0.1    # sigma of the isotropic Gaussian noise
    inter_class_gap: float = 1.0   # chord distance between a domain's centers
    flip_fraction: float = 0.5
    split_counts: tuple[int, int, int] = (4, 4, 4)  # (train, valid, test) domains
    seed: int = 0
    epsilon: float = 0.1

    def validate(self) -> "SynthConfig":
        if self.n_domains < sum(self.split_counts):
            raise ValidationError(
                f"{self.n_domains} domains cannot cover splits {self.split_counts}"
            )
        if any(c < 1 for c in self.split_counts):
            raise ValidationError("each split needs at least one domain")
        if self.samples_per_class < 10:
            raise ValidationError("samples_per_class must be >= 10 (few-shot filter floor)")
        if self.cluster_spread <= 0:
            raise ValidationError("cluster_spread must be positive")
        if not 0 < self.inter_class_gap <= 2:
            raise ValidationError("inter_class_gap must lie in (0, 2] (chord on the unit sphere)")
        if not 0 <= self.flip_fraction <= 1:
            raise ValidationError("flip_fraction must lie in [0, 1]")
        if self.dim < 2:
            raise ValidationError("dim must be >= 2")
        if not 0 <= self.epsilon < 0.4:
            raise ValidationError("epsilon must leave room for synthetic engagement means")
        return self

    @property
    def n_flipped(self) -> int:
        return math.ceil(self.flip_fraction * self.n_domains)


def _split_assignment(config: SynthConfig) -> list[str]:
    """Deal domains to splits round-robin so flipped domains spread evenly."""
    order = ("train", "valid", "test")
    counts = dict(zip(order, config.split_counts))
    out: list[str] = []
    cursor = 0
    for _ in range(config.n_domains):
        for _ in range(3):
            split = order[cursor % 3]
            cursor += 1
            if counts[split] > 0:
                counts[split] -= 1
                out.append(split)
                break
        else:  # quotas exhausted: surplus domains keep cycling
            out.append(order[cursor % 3])
            cursor += 1
    return out


def generate(config: SynthConfig) -> tuple[EmbeddingTable, LabeledDataset]:
    """Deterministically generate the embedding table + labelled dataset pair."""
    config.validate()
    d = config.dim
    axis_rng = stream(config.seed, "synth-class-axis")
    u = axis_rng.standard_normal(d)
    u /= np.linalg.norm(u)
    tilt = math.asin(config.inter_class_gap / 2.0)

    records = []
    samples = []
    splits = _split_assignment(config)
    for n in range(config.n_domains):
        arng = stream(config.seed, "synth-domain-anchor", n)
        a = arng.standard_normal(d)
        a -= (a @ u) * u
        norm = np.linalg.norm(a)
        if norm < 1e-9:  # essentially impossible for d >= 2, regenerate defensively
            a = np.eye(d)[0] - (np.eye(d)[0] @ u) * u
            norm = np.linalg.norm(a)
        a /= norm
        centers = {
            0: math.cos(tilt) * a - math.sin(tilt) * u,
            1: math.cos(tilt) * a + math.sin(tilt) * u,
        }
        flipped = n < config.n_flipped
        srng = stream(config.seed, "synth-domain-samples", n)
        window = 0
        for center_idx in (0, 1):
            y = (1 - center_idx) if flipped else center_idx
            for _ in range(config.samples_per_class):
                vec = centers[center_idx] + config.cluster_spread * srng.standard_normal(d)
                # engagement mean consistent with the label and the dead zone
                margin = 0.05 + srng.random() * (0.5 - config.epsilon - 0.1)
                e = SYNTH_MEDIAN + (config.epsilon + margin) * (1 if y == 1 else -1)
                records.append((n, window, vec.astype(np.float32)))
                samples.append(
                    LabeledSample(
                        game_id=n,
                        window_index=window,
                        engagement_mean=e,
                        y_binary=y,
                        y_class=relabel(y, n),
                        vector=np.asarray(vec, dtype=np.float32),
                    )
                )
                window += 1

    table = EmbeddingTable.from_records(d, records).validate()
    n_samples = len(samples)
    manifest = Manifest(
        subcorpus_id=f"synth-{config.seed}",
        games=tuple(
            GameEntry(game_id=n, name=f"domain-{n:02d}", split=splits[n])
            for n in range(config.n_domains)
        ),
        labeling=LabelingDefaults(
            epsilon=config.epsilon, min_samples_per_class=config.samples_per_class
        ),
        paths=ManifestPaths(embeddings="embeddings.emb", traces=""),
        metadata={
            "generator": "synth",
            "config": {**asdict(config), "split_counts": list(config.split_counts)},
            "subcorpus_median": SYNTH_MEDIAN,
            "ground_truth": {
                "n_samples": n_samples,
                "n_games": config.n_domains,
                "split_games": {
                    sp: splits.count(sp) for sp in ("train", "valid", "test")
                },
                "binary_majority_pct": 50.0,
                "flipped_domains": list(range(config.n_flipped)),
            },
        },
    )
    dataset = LabeledDataset(
        manifest=manifest, samples=tuple(samples), subcorpus_median=SYNTH_MEDIAN
    ).validate()
    return table, dataset
