"""Acceptance suite: one criterion per test, one printed pass/fail line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines. Every
tolerance is pinned here; the synthetic-data criteria use fixed seeds so the
whole suite is deterministic.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from domainshot.cli import run_command
from domainshot.episodes import EpisodeSpec
from domainshot.evaluation import evaluate_episodic, permute_labels, run_matrix
from domainshot.formats import read_embedding_table, read_manifest
from domainshot.gradcheck import run_all
from domainshot.labeling import decode, prepare, read_traces_csv, relabel
from domainshot.projection import init_projection
from domainshot.synth import SynthConfig, generate
from domainshot.training import TrainConfig, lr_at, train_fsl

GVFS_DIR = Path(__file__).resolve().parent.parent / "data" / "gamevibe"


def _report(num: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture(scope="module")
def fig1_dataset():
    # criterion 3 geometry: 12 domains, half flipped, sigma 0.1, gap 1.0
    _, ds = generate(
        SynthConfig(
            n_domains=12, samples_per_class=30, dim=16, cluster_spread=0.1,
            inter_class_gap=1.0, flip_fraction=0.5, split_counts=(4, 4, 4), seed=0,
        )
    )
    return ds


@pytest.fixture(scope="module")
def hard_regime_dataset():
    # criterion 4/5 geometry: sigma 0.35, enough classes per split for 10-way
    _, ds = generate(
        SynthConfig(
            n_domains=18, samples_per_class=30, dim=16, cluster_spread=0.35,
            inter_class_gap=1.0, flip_fraction=0.5, split_counts=(6, 6, 6), seed=0,
        )
    )
    return ds


@pytest.fixture(scope="module")
def fig1_matrix(fig1_dataset):
    base = TrainConfig(
        method="pn",
        spec=EpisodeSpec(n_way=5, k_shot=5, q_query=5, split="train", seed=0),
        seed=0,
    )
    return run_matrix(
        fig1_dataset, ["pn", "mn", "sc", "baseline"], ways=[5], shots=[5],
        base_config=base, runs=5, test_episodes=200,
    )


def test_criterion_1_gradient_correctness():
    t0 = time.time()
    results = run_all(dims=(3, 8, 32), trials=50, seed=0)
    elapsed = time.time() - t0
    worst = max(r.max_error for r in results)
    ok = all(r.passed for r in results) and elapsed < 120
    _report(1, ok, f"5 suites x dims (3,8,32) x 50 trials, worst rel err "
                   f"{worst:.2e} < 1e-4, {elapsed:.1f}s < 120s")
    assert all(r.passed for r in results), [(r.name, r.dim, r.max_error) for r in results]
    assert elapsed < 120


def test_criterion_2_relabelling_algebra():
    t0 = time.time()
    rng = np.random.default_rng(0)
    ys = rng.integers(0, 2, size=100_000)
    ns = rng.integers(0, 10**6, size=100_000)
    codes = np.array([relabel(int(y), int(n)) for y, n in zip(ys, ns)])
    assert np.array_equal(codes, 2 * ns + ys)
    # injectivity: one code per (y, n) pair
    assert len(set(zip(codes.tolist(), ys.tolist(), ns.tolist()))) == len(
        set(codes.tolist())
    )
    # round trip
    for c, y, n in zip(codes[:5000], ys[:5000], ns[:5000]):
        assert decode(int(c)) == (int(y), int(n))
    # cross-domain disjointness: codes of distinct domains never collide
    assert len({int(c) // 2 for c in codes}) == len(set(ns.tolist()))
    # the worked three-domain example
    worked = [[relabel(y, n) for y in (0, 1)] for n in (0, 1, 2)]
    assert worked == [[0, 1], [2, 3], [4, 5]]
    elapsed = time.time() - t0
    ok = elapsed < 10
    _report(2, ok, f"1e5 pairs: injective, decode∘relabel=id, disjoint; worked "
                   f"example {{0,1}},{{2,3}},{{4,5}}; {elapsed:.1f}s < 10s")
    assert ok


def test_criterion_3_fig1_claim(fig1_matrix):
    t0 = time.time()
    fsl_means = {m: fig1_matrix.cells[(m, 5, 5)].mean_accuracy for m in ("pn", "mn", "sc")}
    baseline = fig1_matrix.cells[("baseline", 5, 5)].mean_accuracy
    gap = min(fsl_means.values()) - baseline
    ok = all(v >= 0.90 for v in fsl_means.values()) and baseline <= 0.60 and gap >= 0.25
    _report(3, ok, f"FSL means {({k: round(v, 4) for k, v in fsl_means.items()})} >= 0.90, "
                   f"baseline {baseline:.4f} <= 0.60, gap {gap:.4f} >= 0.25")
    assert all(v >= 0.90 for v in fsl_means.values()), fsl_means
    assert baseline <= 0.60, baseline
    assert gap >= 0.25, gap


def test_criterion_4_shot_and_way_orderings(hard_regime_dataset):
    t0 = time.time()
    base = TrainConfig(
        method="pn",
        spec=EpisodeSpec(n_way=5, k_shot=5, q_query=5, split="train", seed=0),
        seed=0,
    )
    rep = run_matrix(
        hard_regime_dataset, ["pn", "mn", "sc"], ways=[5, 10], shots=[1, 5],
        base_config=base, runs=5, test_episodes=200,
    )
    elapsed = time.time() - t0
    assert not rep.errors, rep.errors
    orderings = []
    for m in ("pn", "mn", "sc"):
        for w in (5, 10):
            orderings.append(rep.cells[(m, w, 5)].mean_accuracy >= rep.cells[(m, w, 1)].mean_accuracy)
        for s in (1, 5):
            orderings.append(rep.cells[(m, 5, s)].mean_accuracy >= rep.cells[(m, 10, s)].mean_accuracy)
    ok = all(orderings) and elapsed < 600
    _report(4, ok, f"12 orderings (5s>=1s, 5w>=10w per method) over 5 runs x 200 "
                   f"episodes all hold; {elapsed:.1f}s < 600s")
    assert all(orderings)
    assert elapsed < 600


def test_criterion_5_chance_level(hard_regime_dataset):
    t0 = time.time()
    permuted = permute_labels(hard_regime_dataset, seed=5)
    model = init_projection(16, seed=3)
    acc5 = float(
        evaluate_episodic(model, permuted, EpisodeSpec(5, 1, 5, split="test", seed=9), 1000, seed=9).mean()
    )
    acc10 = float(
        evaluate_episodic(model, permuted, EpisodeSpec(10, 1, 5, split="test", seed=9), 1000, seed=9).mean()
    )
    elapsed = time.time() - t0
    ok = 0.15 <= acc5 <= 0.25 and 0.07 <= acc10 <= 0.13 and elapsed < 60
    _report(5, ok, f"permuted labels: 5-way {acc5:.4f} in [0.15,0.25], "
                   f"10-way {acc10:.4f} in [0.07,0.13]; {elapsed:.1f}s < 60s")
    assert 0.15 <= acc5 <= 0.25
    assert 0.07 <= acc10 <= 0.13
    assert elapsed < 60


def test_criterion_6_protocol_mechanics(fig1_dataset, fig1_matrix):
    # (a) LR schedule: log values equal lr0 * 0.5^(epoch // 5) exactly
    cfg = TrainConfig(
        method="pn",
        spec=EpisodeSpec(n_way=5, k_shot=5, q_query=5, split="train", seed=0),
        seed=1, lr0=8e-3, max_epochs=17,
    )
    _, log = train_fsl(fig1_dataset, cfg)
    lr_ok = all(e.lr == cfg.lr0 * 0.5 ** (e.epoch // 5) == lr_at(e.epoch, cfg) for e in log.entries)

    # (b) early stopping after exactly `patience` non-improving epochs
    frozen = TrainConfig(
        method="pn", spec=cfg.spec, seed=1, lr0=0.0, allow_lr_outside_range=True,
        max_epochs=100,
    )
    _, flog = train_fsl(fig1_dataset, frozen)
    stop_ok = flog.epochs_run == 1 + frozen.patience_epochs and flog.best_epoch == 0

    # (c) evaluation uses exactly 5 runs x 200 episodes when configured so
    runs_ok = all(
        len(rep.per_run) == 5 and all(len(r.episode_accuracies) == 200 for r in rep.per_run)
        for key, rep in fig1_matrix.cells.items() if key[0] != "baseline"
    )

    # (d) baseline value bit-identical across all (way, shot) cells
    base = TrainConfig(method="pn", spec=cfg.spec, seed=0, max_epochs=1,
                       episodes_per_epoch=2, val_episodes_per_epoch=2)
    grid = run_matrix(fig1_dataset, ["baseline"], ways=[5, 8], shots=[1, 5],
                      base_config=base, runs=2, test_episodes=5)
    cells = [grid.cells[("baseline", w, s)].per_run for w in (5, 8) for s in (1, 5)]
    baseline_ok = all(c == cells[0] for c in cells)

    ok = lr_ok and stop_ok and runs_ok and baseline_ok
    _report(6, ok, f"lr schedule exact: {lr_ok}; stop after exactly "
                   f"{frozen.patience_epochs} stale epochs: {stop_ok}; 5 runs x 200 "
                   f"episodes: {runs_ok}; baseline bit-identical across cells: {baseline_ok}")
    assert lr_ok and stop_ok and runs_ok and baseline_ok


def test_criterion_7_matrix_determinism(tmp_path):
    data = tmp_path / "data"
    rc = run_command(
        ["synth", "--domains", "12", "--per-class", "30", "--dim", "16", "--flip", "0.5",
         "--seed", "3", "--out", str(data)]
    )
    assert rc == 0
    out = tmp_path / "matrix"
    argv = [
        "run-matrix", "--data", str(data), "--methods", "pn,baseline", "--ways", "5",
        "--shots", "1,5", "--runs", "2", "--test-episodes", "20", "--max-epochs", "2",
        "--episodes-per-epoch", "4", "--val-episodes", "4", "--seed", "9",
        "--out", str(out),
    ]
    payloads = []
    for _ in range(2):
        rc = run_command(argv)
        assert rc == 0
        docs = {}
        for path in sorted(out.glob("*.json")):
            if path.name == "config_echo.json":
                continue
            doc = json.loads(path.read_text())
            doc.pop("timestamp", None)
            docs[path.name] = json.dumps(doc, sort_keys=True)
        payloads.append(docs)
    ok = payloads[0] == payloads[1] and len(payloads[0]) >= 2
    _report(7, ok, f"run-matrix rerun with identical seed: {len(payloads[0])} report "
                   f"files byte-identical after dropping the timestamp field")
    assert ok


def test_criterion_8_gamevibe_table1():
    if not GVFS_DIR.exists():
        print(f"ACCEPTANCE 8: SKIP - external GameVibe annotations not present "
              f"(expected under {GVFS_DIR})")
        pytest.skip("GameVibe corpus not available in this environment")
    expected = {
        "gvfs1": (1054, 23, 52.47),
        "gvfs2": (1026, 22, 52.14),
        "gvfs3": (797, 19, 54.20),
        "gvfs4": (1186, 27, 50.34),
    }
    results = {}
    for name, (n_samples, n_games, majority) in expected.items():
        sub = GVFS_DIR / name
        manifest = read_manifest(sub / "manifest.json")
        traces = read_traces_csv(sub / "traces.csv")
        table = read_embedding_table(sub / "embeddings.emb")
        _, stats = prepare(manifest, traces, table)
        results[name] = (stats.n_samples, stats.n_games, stats.binary_majority_pct)
        assert stats.n_samples == n_samples
        assert stats.n_games == n_games
        assert abs(stats.binary_majority_pct - majority) <= 0.05
    _report(8, True, f"Table-1 reproduction: {results}")
