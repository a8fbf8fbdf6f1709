import numpy as np
import pytest

from domainshot.baseline import (
    BaselineModel,
    ce_loss,
    eval_binary,
    init_baseline,
    train_baseline,
)
from domainshot.episodes import EpisodeSpec
from domainshot.errors import ValidationError
from domainshot.gradcheck import check_baseline_ce
from domainshot.projection import ProjectionModel
from domainshot.synth import SynthConfig, generate
from domainshot.training import TrainConfig


def spec():
    return EpisodeSpec(n_way=5, k_shot=5, q_query=5, split="train", seed=0)


def test_ce_loss_zero_logits_is_log2():
    dim = 4
    model = BaselineModel(
        projection=ProjectionModel(W=np.eye(dim), b=np.zeros(dim)),
        V=np.zeros((2, dim)),
        c=np.zeros(2),
    )
    X = np.abs(np.random.default_rng(0).normal(size=(6, dim)))
    loss, _ = ce_loss(model, X, np.array([0, 1, 0, 1, 1, 0]))
    assert loss == pytest.approx(np.log(2.0), rel=1e-12)


def test_ce_loss_confident_correct_approaches_zero():
    dim = 2
    model = BaselineModel(
        projection=ProjectionModel(W=np.eye(dim), b=np.zeros(dim)),
        V=np.array([[50.0, 0.0], [0.0, 50.0]]),
        c=np.zeros(2),
    )
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    loss, _ = ce_loss(model, X, np.array([0, 1]))
    assert loss < 1e-8


def test_ce_loss_rejects_empty_batch():
    model = init_baseline(3, seed=0)
    with pytest.raises(ValidationError):
        ce_loss(model, np.zeros((0, 3)), np.array([], dtype=int))


def test_ce_gradients_match_fd():
    result = check_baseline_ce(6, trials=15, seed=5)
    assert result.passed, result.max_error


def test_train_separable_flip0_reaches_95():
    # globally consistent classes: both centers sit at +/- the shared axis
    # (gap 2.0), so the pooled binary problem is cleanly separable; hyper-
    # parameters picked by greedy validation search per the shared protocol
    _, ds = generate(SynthConfig(flip_fraction=0.0, inter_class_gap=2.0, seed=2))
    best = None
    for lr in (5e-3, 8e-3):
        for train_seed in (0, 1):
            model, log = train_baseline(
                ds, TrainConfig(method="baseline", spec=spec(), seed=train_seed, lr0=lr)
            )
            if best is None or log.best_val_accuracy > best[0]:
                best = (log.best_val_accuracy, model)
    assert eval_binary(best[1], ds, "test") >= 0.95


def test_train_flipped_caps_at_60():
    # balanced flips leave no global binary separator; aggregate over runs
    _, ds = generate(SynthConfig(flip_fraction=0.5, seed=0))
    accs = []
    for run_seed in range(3):
        model, _ = train_baseline(ds, TrainConfig(method="baseline", spec=spec(), seed=run_seed))
        accs.append(eval_binary(model, ds, "test"))
    assert np.mean(accs) <= 0.60


def test_train_deterministic(easy_dataset):
    cfg = TrainConfig(method="baseline", spec=spec(), seed=3, max_epochs=5)
    m1, log1 = train_baseline(easy_dataset, cfg)
    m2, log2 = train_baseline(easy_dataset, cfg)
    assert np.array_equal(m1.V, m2.V)
    assert np.array_equal(m1.projection.W, m2.projection.W)
    assert log1.entries == log2.entries


def test_eval_binary_independent_of_episode_config(easy_dataset):
    model, _ = train_baseline(
        easy_dataset, TrainConfig(method="baseline", spec=spec(), seed=0, max_epochs=3)
    )
    # no way/shot anywhere in the call: same model + split -> same number
    a = eval_binary(model, easy_dataset, "test")
    b = eval_binary(model, easy_dataset, "test")
    assert a == b


def test_eval_binary_empty_split_rejected(easy_dataset):
    model = init_baseline(16, seed=0)
    ds = easy_dataset
    # a dataset whose manifest has no test games
    from domainshot.data import GameEntry, LabeledDataset, Manifest

    games = tuple(
        GameEntry(g.game_id, g.name, "train" if g.split == "test" else g.split)
        for g in ds.manifest.games
    )
    manifest = Manifest(
        subcorpus_id=ds.manifest.subcorpus_id, games=games,
        labeling=ds.manifest.labeling, paths=ds.manifest.paths, metadata=ds.manifest.metadata,
    )
    moved = LabeledDataset(manifest=manifest, samples=ds.samples, subcorpus_median=ds.subcorpus_median)
    with pytest.raises(ValidationError):
        eval_binary(model, moved, "test")


def test_random_model_near_chance_on_balanced_data(easy_dataset):
    # n = 240 balanced test samples; a fresh random head sits near 0.5
    accs = [
        eval_binary(init_baseline(16, seed=s), easy_dataset, "test") for s in range(20)
    ]
    assert 0.35 <= float(np.mean(accs)) <= 0.65
