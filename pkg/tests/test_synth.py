import numpy as np
import pytest

from domainshot.errors import ValidationError
from domainshot.formats import write_labeled_dataset
from domainshot.labeling import filter_games
from domainshot.synth import SynthConfig, generate


def test_config_guards():
    with pytest.raises(ValidationError):
        SynthConfig(n_domains=5, split_counts=(4, 4, 4)).validate()
    with pytest.raises(ValidationError):
        SynthConfig(samples_per_class=5).validate()
    with pytest.raises(ValidationError):
        SynthConfig(inter_class_gap=2.5).validate()


def test_every_domain_survives_filter(easy_dataset):
    spc = easy_dataset.manifest.metadata["config"]["samples_per_class"]
    kept = filter_games(list(easy_dataset.samples), spc)
    assert {s.game_id for s in kept} == {g.game_id for g in easy_dataset.manifest.games}


def test_relabel_algebra_holds(easy_dataset):
    for s in easy_dataset.samples:
        assert s.y_class == 2 * s.game_id + s.y_binary


def test_centers_have_exact_gap():
    config = SynthConfig(cluster_spread=1e-9, samples_per_class=10, seed=3)
    _, ds = generate(config)
    # with negligible noise, samples sit on the centers: check the chord
    by_class = {}
    for s in ds.samples:
        by_class.setdefault(s.y_class, s.vector.astype(np.float64))
    for n in range(config.n_domains):
        gap = np.linalg.norm(by_class[2 * n] - by_class[2 * n + 1])
        assert gap == pytest.approx(config.inter_class_gap, abs=1e-5)
        assert np.linalg.norm(by_class[2 * n]) == pytest.approx(1.0, abs=1e-5)


def test_nearest_center_oracle_accuracy():
    # sigma = 0.05, gap = 1.0: per-domain nearest-center >= 0.999 over 10^4 samples
    config = SynthConfig(
        n_domains=10, samples_per_class=500, dim=16, cluster_spread=0.05,
        split_counts=(4, 3, 3), seed=1,
    )
    _, ds = generate(config)
    assert len(ds.samples) == 10_000
    vectors = ds.vectors()
    labels = np.array([s.y_class for s in ds.samples])
    centers = {c: vectors[labels == c].mean(axis=0) for c in np.unique(labels)}
    correct = 0
    for n in range(config.n_domains):
        rows = np.where((labels // 2) == n)[0]
        pair = np.stack([centers[2 * n], centers[2 * n + 1]])
        d = np.linalg.norm(vectors[rows, None, :] - pair[None, :, :], axis=2)
        pred = 2 * n + np.argmin(d, axis=1)
        correct += int((pred == labels[rows]).sum())
    assert correct / len(ds.samples) >= 0.999


def test_same_seed_byte_identical_files(tmp_path):
    config = SynthConfig(seed=9)
    for name in ("a", "b"):
        _, ds = generate(config)
        write_labeled_dataset(ds, tmp_path / name)
    for fname in ("manifest.json", "labels.csv", "embeddings.emb"):
        assert (tmp_path / "a" / fname).read_bytes() == (tmp_path / "b" / fname).read_bytes()


def test_flip_half_defeats_pooled_linear_classifier():
    # brute-force oracle: best of logistic regression, per-coordinate threshold
    # sweeps, and the majority constant, all scored on the pooled sample; with
    # domains well in excess of the dimension a linear probe cannot park enough
    # same-flip domains inside its decision band to escape chance
    pytest.importorskip("sklearn")
    from sklearn.linear_model import LogisticRegression

    config = SynthConfig(
        n_domains=30, samples_per_class=30, dim=16, cluster_spread=0.05,
        split_counts=(10, 10, 10), seed=0,
    )
    _, ds = generate(config)
    X = ds.vectors()
    y = np.array([s.y_binary for s in ds.samples])

    best = max(np.mean(y == 0), np.mean(y == 1))  # constant classifier
    clf = LogisticRegression(max_iter=2000).fit(X, y)
    best = max(best, clf.score(X, y))
    for j in range(X.shape[1]):
        for t in np.quantile(X[:, j], np.linspace(0.05, 0.95, 19)):
            for sign in (1, -1):
                best = max(best, np.mean((sign * (X[:, j] - t) > 0) == y))
    assert best <= 0.6

    # while a per-domain nearest-center classifier is nearly perfect
    labels = np.array([s.y_class for s in ds.samples])
    centers = {c: X[labels == c].mean(axis=0) for c in np.unique(labels)}
    correct = 0
    for n in range(config.n_domains):
        rows = np.where(labels // 2 == n)[0]
        pair = np.stack([centers[2 * n], centers[2 * n + 1]])
        d = np.linalg.norm(X[rows, None, :] - pair[None, :, :], axis=2)
        correct += int((2 * n + np.argmin(d, axis=1) == labels[rows]).sum())
    assert correct / len(labels) >= 0.99


def test_flip_zero_is_linearly_separable():
    sklearn = pytest.importorskip("sklearn")
    from sklearn.linear_model import LogisticRegression

    _, ds = generate(SynthConfig(flip_fraction=0.0, seed=4))
    X = ds.vectors()
    y = np.array([s.y_binary for s in ds.samples])
    assert LogisticRegression(max_iter=2000).fit(X, y).score(X, y) >= 0.99


def test_flipped_domains_balanced_across_splits(easy_dataset):
    flipped = set(easy_dataset.manifest.metadata["ground_truth"]["flipped_domains"])
    split_of = easy_dataset.manifest.split_of()
    for split in ("train", "valid", "test"):
        games = [g for g, s in split_of.items() if s == split]
        assert sum(1 for g in games if g in flipped) == 2  # 2 of 4 per split


def test_dataset_loadable_and_valid(tmp_path, easy_dataset):
    from domainshot.formats import read_labeled_dataset
    out = write_labeled_dataset(easy_dataset, tmp_path / "ds")
    read_labeled_dataset(out)  # validates internally
