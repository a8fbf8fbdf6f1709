"""Episodic test evaluation, multi-run aggregation, and method comparison.

The unit of aggregation defaults to the episode accuracy (the prototypical
networks convention): the 95% interval is 1.96 * sd / sqrt(count) over the
pooled per-episode accuracies of all runs. ``ci_unit="run"`` switches the
interval to the per-run means. Two reports are "on par" when their intervals
overlap; otherwise the larger mean wins.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import baseline as baseline_mod
from .data import LabeledDataset, ProjectionCheckpoint
from .episodes import EpisodeSampler, EpisodeSpec
from .errors import DomainshotError, ValidationError
from .losses import LossConfig, episode_accuracy
from .projection import ProjectionModel
from .rng import choice_without_replacement, stream
from .training import TrainConfig, project_episode, train_fsl

CI_Z = 1.96  # two-sided 95% normal quantile


@dataclass(frozen=True)
class RunResult:
    seed: int
    episode_accuracies: tuple[float, ...]


@dataclass(frozen=True)
class RunReport:
    method: str
    n_way: int
    k_shot: int
    q_query: int
    per_run: tuple[RunResult, ...]
    mean_accuracy: float
    ci95_half_width: float
    ci_unit: str = "episode"

    def to_payload(self) -> dict:
        return {
            "method": self.method,
            "n_way": self.n_way,
            "k_shot": self.k_shot,
            "q_query": self.q_query,
            "per_run": [
                {"seed": r.seed, "episode_accuracies": list(r.episode_accuracies)}
                for r in self.per_run
            ],
            "mean_accuracy": self.mean_accuracy,
            "ci95_half_width": self.ci95_half_width,
            "ci_unit": self.ci_unit,
        }

    @classmethod
    def from_payload(cls, doc: dict) -> "RunReport":
        return cls(
            method=doc["method"],
            n_way=doc["n_way"],
            k_shot=doc["k_shot"],
            q_query=doc["q_query"],
            per_run=tuple(
                RunResult(seed=r["seed"], episode_accuracies=tuple(r["episode_accuracies"]))
                for r in doc["per_run"]
            ),
            mean_accuracy=doc["mean_accuracy"],
            ci95_half_width=doc["ci95_half_width"],
            ci_unit=doc.get("ci_unit", "episode"),
        )


def evaluate_episodic(
    checkpoint: ProjectionCheckpoint | ProjectionModel,
    dataset: LabeledDataset,
    spec: EpisodeSpec,
    n_episodes: int,
    seed: int,
    loss_config: LossConfig = LossConfig(),
) -> np.ndarray:
    """Per-episode nearest-prototype accuracy over seeded episodes of spec.split."""
    model = (
        checkpoint
        if isinstance(checkpoint, ProjectionModel)
        else ProjectionModel.from_checkpoint(checkpoint)
    )
    sampler = EpisodeSampler(dataset, replace(spec, seed=seed))
    accs = np.empty(n_episodes)
    for i in range(n_episodes):
        batch, _ = project_episode(model, sampler.sample(i))
        accs[i] = episode_accuracy(batch, loss_config)
    return accs


def aggregate(
    method: str,
    spec: EpisodeSpec,
    runs: list[RunResult],
    ci_unit: str = "episode",
) -> RunReport:
    """Pool R runs of equal episode count into one report with a 95% interval."""
    if not runs:
        raise ValidationError("aggregate needs at least one run")
    if ci_unit not in ("episode", "run"):
        raise ValidationError(f"ci_unit must be 'episode' or 'run', got {ci_unit!r}")
    lengths = {len(r.episode_accuracies) for r in runs}
    if len(lengths) != 1:
        raise ValidationError(f"runs have unequal episode counts: {sorted(lengths)}")
    pooled = np.concatenate([np.asarray(r.episode_accuracies) for r in runs])
    values = (
        pooled if ci_unit == "episode" else np.array([np.mean(r.episode_accuracies) for r in runs])
    )
    if len(values) < 2:
        warnings.warn("confidence interval undefined for a single accuracy value; reporting 0")
        half = 0.0
    else:
        half = float(CI_Z * values.std(ddof=1) / np.sqrt(len(values)))
    return RunReport(
        method=method,
        n_way=spec.n_way,
        k_shot=spec.k_shot,
        q_query=spec.q_query,
        per_run=tuple(runs),
        mean_accuracy=float(pooled.mean()),
        ci95_half_width=half,
        ci_unit=ci_unit,
    )


def compare(a: RunReport, b: RunReport) -> str:
    """'on_par' if the 95% intervals overlap, else 'a_higher' / 'b_higher'."""
    if abs(a.mean_accuracy - b.mean_accuracy) <= a.ci95_half_width + b.ci95_half_width:
        return "on_par"
    return "a_higher" if a.mean_accuracy > b.mean_accuracy else "b_higher"


def permute_labels(dataset: LabeledDataset, seed: int) -> LabeledDataset:
    """Diagnostic: shuffle y_class assignments among the samples of each split.

    Vectors stay put, the label multiset per split is preserved, so episodic
    accuracy of any model drops to chance. The result deliberately violates
    the relabelling invariant and must not be written to disk.
    """
    new_classes = np.array([s.y_class for s in dataset.samples], dtype=np.int64)
    for k, split in enumerate(("train", "valid", "test")):
        rows = dataset.sample_indices_for_split(split)
        if len(rows) == 0:
            continue
        shuffled = choice_without_replacement(
            stream(seed, "permute-labels", k), new_classes[rows], len(rows)
        )
        new_classes[rows] = shuffled
    samples = tuple(
        replace(s, y_class=int(c)) for s, c in zip(dataset.samples, new_classes)
    )
    return LabeledDataset(
        manifest=dataset.manifest, samples=samples, subcorpus_median=dataset.subcorpus_median
    )


# ---------------------------------------------------------------------------
# experiment matrix

@dataclass(frozen=True)
class MatrixReport:
    cells: dict          # (method, way, shot) -> RunReport
    errors: dict         # (method, way, shot) -> error string
    runs: int
    test_episodes: int
    binary_majority_pct: float

    def to_payload(self) -> dict:
        return {
            "cells": [
                {"method": m, "n_way": w, "k_shot": s, "report": r.to_payload()}
                for (m, w, s), r in sorted(self.cells.items())
            ],
            "errors": [
                {"method": m, "n_way": w, "k_shot": s, "error": e}
                for (m, w, s), e in sorted(self.errors.items())
            ],
            "runs": self.runs,
            "test_episodes": self.test_episodes,
            "binary_majority_pct": self.binary_majority_pct,
        }


_WORKER_STATE: dict = {}


def _worker_init(dataset, base_config, test_episodes, ci_unit):
    _WORKER_STATE["args"] = (dataset, base_config, test_episodes, ci_unit)


def _worker_task(task):
    dataset, base, test_episodes, _ = _WORKER_STATE["args"]
    return _execute_run(dataset, base, test_episodes, task)


def _execute_run(dataset: LabeledDataset, base: TrainConfig, test_episodes: int, task):
    """One (method, way, shot, run) training + evaluation; returns (task, outcome)."""
    method, way, shot, run_index = task
    seed = base.seed + run_index
    try:
        if method == "baseline":
            config = replace(base, method="baseline", seed=seed)
            model, _ = baseline_mod.train_baseline(dataset, config)
            acc = baseline_mod.eval_binary(model, dataset, "test")
            return task, RunResult(seed=seed, episode_accuracies=(acc,))
        spec = replace(base.spec, n_way=way, k_shot=shot, split="train", seed=seed)
        config = replace(base, method=method, spec=spec, seed=seed)
        ckpt, _ = train_fsl(dataset, config)
        accs = evaluate_episodic(
            ckpt, dataset, replace(spec, split="test"), test_episodes, seed, base.loss
        )
        return task, RunResult(seed=seed, episode_accuracies=tuple(float(a) for a in accs))
    except DomainshotError as exc:
        return task, f"{type(exc).__name__}: {exc}"


def run_matrix(
    dataset: LabeledDataset,
    methods,
    ways,
    shots,
    base_config: TrainConfig,
    runs: int = 5,
    test_episodes: int = 200,
    threads: int = 1,
    ci_unit: str = "episode",
) -> MatrixReport:
    """Train and evaluate every (method, way, shot) cell, R runs each.

    The baseline is trained once per run index and its report is reused across
    every (way, shot) cell, so the baseline value is identical in all of them.
    Per-cell errors are recorded and the rest of the matrix continues.
    Parallelism is across (cell, run) tasks only; results are assembled in a
    fixed order, so the report is independent of the thread count.
    """
    methods = list(methods)
    tasks = []
    if "baseline" in methods:
        tasks.extend(("baseline", 0, 0, r) for r in range(runs))
    for m in methods:
        if m == "baseline":
            continue
        for way in ways:
            for shot in shots:
                tasks.extend((m, way, shot, r) for r in range(runs))

    if threads <= 1:
        outcomes = [_execute_run(dataset, base_config, test_episodes, t) for t in tasks]
    else:
        with ProcessPoolExecutor(
            max_workers=threads,
            initializer=_worker_init,
            initargs=(dataset, base_config, test_episodes, ci_unit),
        ) as pool:
            outcomes = list(pool.map(_worker_task, tasks))

    by_cell: dict = {}
    for (method, way, shot, run_index), outcome in outcomes:
        by_cell.setdefault((method, way, shot), {})[run_index] = outcome

    cells: dict = {}
    errors: dict = {}
    baseline_report = None
    baseline_error = None
    if "baseline" in methods:
        run_outcomes = by_cell.get(("baseline", 0, 0), {})
        errs = [o for o in run_outcomes.values() if isinstance(o, str)]
        if errs:
            baseline_error = errs[0]
        else:
            results = [run_outcomes[r] for r in sorted(run_outcomes)]
            baseline_report = aggregate(
                "baseline",
                EpisodeSpec(n_way=2, k_shot=1, q_query=1, split="test", seed=base_config.seed),
                results,
                ci_unit,
            )
    for m in methods:
        for way in ways:
            for shot in shots:
                key = (m, way, shot)
                if m == "baseline":
                    if baseline_error is not None:
                        errors[key] = baseline_error
                    else:
                        cells[key] = replace(baseline_report, n_way=way, k_shot=shot)
                    continue
                run_outcomes = by_cell.get(key, {})
                errs = [o for o in run_outcomes.values() if isinstance(o, str)]
                if errs:
                    errors[key] = errs[0]
                    continue
                results = [run_outcomes[r] for r in sorted(run_outcomes)]
                spec = replace(base_config.spec, n_way=way, k_shot=shot)
                cells[key] = aggregate(m, spec, results, ci_unit)

    rows = dataset.sample_indices_for_split("test")
    y = np.array([dataset.samples[i].y_binary for i in rows]) if len(rows) else np.array([0])
    majority = max(float(np.mean(y == 1)), float(np.mean(y == 0))) * 100.0
    return MatrixReport(
        cells=cells,
        errors=errors,
        runs=runs,
        test_episodes=test_episodes,
        binary_majority_pct=majority,
    )


def format_matrix_table(report: MatrixReport, methods, ways, shots) -> str:
    """Aligned text table; '*' marks the best cell per column, '=' marks cells
    statistically on par with it (95% interval overlap)."""
    columns = [(w, s) for w in ways for s in shots]
    header = ["method".ljust(10)] + [f"{w}w{s}s".rjust(16) for w, s in columns]
    lines = ["  ".join(header)]
    best: dict = {}
    for col in columns:
        candidates = [(m, report.cells.get((m, *col))) for m in methods]
        candidates = [(m, r) for m, r in candidates if r is not None]
        if candidates:
            best[col] = max(candidates, key=lambda mr: mr[1].mean_accuracy)
    for m in methods:
        row = [m.ljust(10)]
        for col in columns:
            rep = report.cells.get((m, *col))
            if rep is None:
                row.append("ERROR".rjust(16))
                continue
            mark = " "
            if col in best:
                best_m, best_rep = best[col]
                if best_m == m:
                    mark = "*"
                elif compare(rep, best_rep) == "on_par":
                    mark = "="
            row.append(f"{100 * rep.mean_accuracy:6.2f} ±{100 * rep.ci95_half_width:5.2f} {mark}".rjust(16))
        lines.append("  ".join(row))
    chance_row = ["chance".ljust(10)]
    for w, _ in columns:
        chance_row.append(f"{100.0 / w:6.2f}".rjust(16))
    lines.append("  ".join(chance_row))
    lines.append(
        f"(episodic chance = 1/way; baseline is non-episodic binary accuracy, "
        f"test-split majority {report.binary_majority_pct:.2f}%)"
    )
    return "\n".join(lines)
