import numpy as np
import pytest

from domainshot.data import (
    EmbeddingTable,
    GameEntry,
    LabelingDefaults,
    Manifest,
    ManifestPaths,
)
from domainshot.synth import SynthConfig, generate


@pytest.fixture(scope="session")
def easy_dataset():
    """Fig-1 geometry: 12 domains, half flipped, tight clusters."""
    _, ds = generate(SynthConfig(seed=0))
    return ds


@pytest.fixture(scope="session")
def hard_dataset():
    """Hard regime: wide clusters, enough classes per split for 10-way."""
    _, ds = generate(
        SynthConfig(
            n_domains=18,
            samples_per_class=30,
            dim=16,
            cluster_spread=0.35,
            split_counts=(6, 6, 6),
            seed=0,
        )
    )
    return ds


@pytest.fixture()
def tiny_table():
    rng = np.random.default_rng(7)
    records = [(g, w, rng.normal(size=4).astype(np.float32)) for g in range(2) for w in range(3)]
    return EmbeddingTable.from_records(4, records)


@pytest.fixture()
def toy_manifest():
    return Manifest(
        subcorpus_id="toy",
        games=(
            GameEntry(0, "alpha", "train"),
            GameEntry(1, "beta", "valid"),
            GameEntry(2, "gamma", "test"),
        ),
        labeling=LabelingDefaults(epsilon=0.1, min_samples_per_class=10),
        paths=ManifestPaths(embeddings="embeddings.emb", traces="traces.csv"),
    )
