import numpy as np
import pytest

from domainshot.episodes import EpisodeSampler, EpisodeSpec, eligible_classes, sample_episode
from domainshot.errors import SamplerError, ValidationError


def test_eligibility_threshold(easy_dataset):
    # synth gives 30 samples per class; K=5, Q=5 -> everything eligible
    classes = eligible_classes(easy_dataset, "train", 5, 5)
    assert len(classes) == 8  # 4 train domains x 2 classes
    assert eligible_classes(easy_dataset, "train", 20, 11) == []  # 31 > 30
    assert len(eligible_classes(easy_dataset, "train", 20, 10)) == 8  # boundary


def test_spec_validation():
    with pytest.raises(ValidationError):
        EpisodeSpec(n_way=1, k_shot=1).validate()
    with pytest.raises(ValidationError):
        EpisodeSpec(n_way=2, k_shot=0).validate()
    with pytest.raises(ValidationError):
        EpisodeSpec(n_way=2, k_shot=1, split="holdout").validate()


def test_same_seed_same_episode(easy_dataset):
    spec = EpisodeSpec(n_way=5, k_shot=2, q_query=3, split="train", seed=42)
    a = sample_episode(easy_dataset, spec, 7)
    b = sample_episode(easy_dataset, spec, 7)
    assert np.array_equal(a.classes, b.classes)
    assert np.array_equal(a.support_x, b.support_x)
    assert np.array_equal(a.query_y, b.query_y)


def test_uses_all_classes_when_exactly_n(easy_dataset):
    # test split has 4 domains = 8 classes; 8-way must use all of them
    spec = EpisodeSpec(n_way=8, k_shot=5, q_query=5, split="test", seed=0)
    ep = sample_episode(easy_dataset, spec, 0)
    assert sorted(ep.classes.tolist()) == sorted(eligible_classes(easy_dataset, "test", 5, 5))


def test_infeasible_spec_raises(easy_dataset):
    spec = EpisodeSpec(n_way=9, k_shot=5, q_query=5, split="test", seed=0)
    with pytest.raises(SamplerError):
        EpisodeSampler(easy_dataset, spec)


def test_episode_structure_property(easy_dataset):
    spec = EpisodeSpec(n_way=5, k_shot=3, q_query=4, split="train", seed=9)
    sampler = EpisodeSampler(easy_dataset, spec)
    split_games = {g.game_id for g in easy_dataset.manifest.games if g.split == "train"}
    for i in range(1000):
        ep = sampler.sample(i)
        assert len(set(ep.classes.tolist())) == 5
        assert ep.support_x.shape == (15, 16) and ep.query_x.shape == (20, 16)
        sup_counts = {c: int((ep.support_y == c).sum()) for c in ep.classes}
        qry_counts = {c: int((ep.query_y == c).sum()) for c in ep.classes}
        assert all(v == 3 for v in sup_counts.values())
        assert all(v == 4 for v in qry_counts.values())
        assert all(c // 2 in split_games for c in ep.classes.tolist())


def test_support_query_disjoint(easy_dataset):
    spec = EpisodeSpec(n_way=5, k_shot=5, q_query=5, split="train", seed=3)
    sampler = EpisodeSampler(easy_dataset, spec)
    for i in range(50):
        ep = sampler.sample(i)
        sup = {tuple(v) for v in ep.support_x}
        qry = {tuple(v) for v in ep.query_x}
        assert not sup & qry


def test_class_coverage(easy_dataset):
    spec = EpisodeSpec(n_way=5, k_shot=1, q_query=1, split="train", seed=11)
    sampler = EpisodeSampler(easy_dataset, spec)
    seen = set()
    for i in range(200):
        seen.update(sampler.sample(i).classes.tolist())
    assert seen == set(eligible_classes(easy_dataset, "train", 1, 1))


def test_index_changes_episode(easy_dataset):
    spec = EpisodeSpec(n_way=5, k_shot=2, q_query=2, split="train", seed=5)
    sampler = EpisodeSampler(easy_dataset, spec)
    distinct = 0
    for i in range(100):
        a, b = sampler.sample(2 * i), sampler.sample(2 * i + 1)
        if not (
            np.array_equal(a.classes, b.classes)
            and np.array_equal(a.support_x, b.support_x)
            and np.array_equal(a.query_x, b.query_x)
        ):
            distinct += 1
    assert distinct >= 99
