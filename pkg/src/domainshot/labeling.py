"""Raw engagement traces -> labelled dataset.

Pipeline: per-trace min-max normalisation, per-game median trace on a common
10 Hz grid, 1-second window means shifted back by the annotator reaction time,
binarisation against the pooled subcorpus median with an epsilon dead zone,
per-game relabelling into globally disjoint classes (class = 2 * game_id + y),
and removal of games without enough samples in both classes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data import (
    NUM_BINARY_CLASSES,
    EmbeddingTable,
    LabeledDataset,
    LabeledSample,
    LabelingDefaults,
    Manifest,
)
from .errors import FormatError, PipelineError, ValidationError

TRACES_HEADER = "game_id,annotator_id,time_s,value"


class DegenerateTraceWarning(UserWarning):
    """A constant trace was normalised to the neutral value 0.5."""


@dataclass(frozen=True)
class AnnotationTrace:
    """One annotator's continuous engagement signal for one game."""

    game_id: int
    annotator_id: int
    times: np.ndarray   # (n,) seconds, strictly increasing
    values: np.ndarray  # (n,) unbounded annotation values

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=np.float64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))

    def validate(self) -> "AnnotationTrace":
        if len(self.times) < 2:
            raise ValidationError(
                f"trace (game {self.game_id}, annotator {self.annotator_id}) has "
                f"{len(self.times)} points; need at least 2"
            )
        if not np.all(np.diff(self.times) > 0):
            raise ValidationError(
                f"trace (game {self.game_id}, annotator {self.annotator_id}) times "
                f"are not strictly increasing"
            )
        if self.times[0] < 0:
            raise ValidationError("trace times must be non-negative")
        return self


@dataclass(frozen=True)
class LabelingConfig:
    epsilon: float = 0.1
    min_samples_per_class: int = 10
    resample_hz: float = 10.0
    reaction_shift_s: float = 1.0
    window_s: float = 1.0

    def validate(self) -> "LabelingConfig":
        if self.epsilon < 0:
            raise ValidationError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.window_s <= 0:
            raise ValidationError(f"window_s must be positive, got {self.window_s}")
        if self.min_samples_per_class <= 0:
            raise ValidationError("min_samples_per_class must be positive")
        if self.resample_hz <= 0:
            raise ValidationError("resample_hz must be positive")
        if self.reaction_shift_s < 0:
            raise ValidationError("reaction_shift_s must be non-negative")
        shift = self.reaction_shift_s / self.window_s
        if abs(shift - round(shift)) > 1e-9:
            raise ValidationError(
                "reaction_shift_s must be an integer multiple of window_s so the "
                "shifted window index stays integral"
            )
        return self

    @property
    def shift_windows(self) -> int:
        return round(self.reaction_shift_s / self.window_s)


# ---------------------------------------------------------------------------
# trace operations

def normalize_trace(trace: AnnotationTrace) -> AnnotationTrace:
    """Min-max scale values to [0, 1]; a constant trace maps to 0.5 + warning."""
    trace.validate()
    lo, hi = trace.values.min(), trace.values.max()
    if hi == lo:
        warnings.warn(
            f"constant trace (game {trace.game_id}, annotator {trace.annotator_id}); "
            f"normalised to 0.5",
            DegenerateTraceWarning,
        )
        vals = np.full_like(trace.values, 0.5)
    else:
        vals = (trace.values - lo) / (hi - lo)
    return replace(trace, values=vals)


def median_trace(traces, resample_hz: float = 10.0) -> tuple[np.ndarray, np.ndarray]:
    """Per-tick median of the traces resampled to a common grid.

    The grid is t = k / resample_hz restricted to the overlapping span of all
    traces; resampling is linear interpolation; the median of an even count is
    the mean of the two central values.

    Returns (tick_times, median_values).
    """
    traces = list(traces)
    if not traces:
        raise ValidationError("median_trace needs at least one trace")
    start = max(t.times[0] for t in traces)
    end = min(t.times[-1] for t in traces)
    k_first = math.ceil(start * resample_hz - 1e-9)
    k_last = math.floor(end * resample_hz + 1e-9)
    if k_last < k_first:
        raise ValidationError("traces have zero-length overlap; no common grid tick")
    ticks = np.arange(k_first, k_last + 1, dtype=np.float64) / resample_hz
    resampled = np.stack([np.interp(ticks, t.times, t.values) for t in traces])
    return ticks, np.median(resampled, axis=0)


def window_average(
    ticks: np.ndarray,
    values: np.ndarray,
    window_s: float = 1.0,
    reaction_shift_s: float = 1.0,
) -> list[tuple[int, float]]:
    """Mean engagement per window, re-indexed to the stimulus window.

    Annotation window k covers [k*window_s, (k+1)*window_s); the emitted index
    is k - reaction_shift_s/window_s, pairing the annotation with the video
    second that caused it. Windows with a negative shifted index or no ticks
    are dropped.
    """
    if len(ticks) == 0:
        return []
    shift = round(reaction_shift_s / window_s)
    windows = np.floor(ticks / window_s + 1e-9).astype(np.int64)
    out = []
    for k in np.unique(windows):
        idx = int(k) - shift
        if idx < 0:
            continue
        out.append((idx, float(values[windows == k].mean())))
    return out


def subcorpus_median(all_window_means) -> float:
    """Statistical median of the pooled per-window means of the whole subcorpus."""
    means = np.asarray(list(all_window_means), dtype=np.float64)
    if means.size == 0:
        raise ValidationError("subcorpus_median of an empty pool")
    return float(np.median(means))


def binarize(e: float, e_bar: float, epsilon: float):
    """1 (high) if e > e_bar + epsilon, 0 (low) if e < e_bar - epsilon, else None."""
    if e > e_bar + epsilon:
        return 1
    if e < e_bar - epsilon:
        return 0
    return None


def relabel(y: int, game_id: int, num_binary_classes: int = NUM_BINARY_CLASSES) -> int:
    """Map (binary label, domain) to the globally unique class |Y|*n + y."""
    if not 0 <= y < num_binary_classes:
        raise ValidationError(f"label {y} out of range [0, {num_binary_classes})")
    if game_id < 0:
        raise ValidationError(f"negative domain id {game_id}")
    return num_binary_classes * game_id + y


def decode(y_class: int, num_binary_classes: int = NUM_BINARY_CLASSES) -> tuple[int, int]:
    """Inverse of :func:`relabel`: y_class -> (y, game_id)."""
    return y_class % num_binary_classes, y_class // num_binary_classes


def filter_games(samples, min_samples_per_class: int):
    """Keep only games with >= min_samples_per_class samples in both classes."""
    samples = list(samples)
    counts: dict[tuple[int, int], int] = {}
    for s in samples:
        counts[(s.game_id, s.y_binary)] = counts.get((s.game_id, s.y_binary), 0) + 1
    games = {s.game_id for s in samples}
    kept = {
        g
        for g in games
        if counts.get((g, 0), 0) >= min_samples_per_class
        and counts.get((g, 1), 0) >= min_samples_per_class
    }
    if games and not kept:
        raise PipelineError(
            f"all {len(games)} games discarded: none has {min_samples_per_class} "
            f"samples in both classes"
        )
    return [s for s in samples if s.game_id in kept]


# ---------------------------------------------------------------------------
# full pipeline

@dataclass(frozen=True)
class PrepareStats:
    """Dataset statistics in the shape of the corpus summary table."""

    subcorpus_id: str
    n_samples: int
    n_games: int
    split_games: dict           # split -> game count
    binary_majority_pct: float
    subcorpus_median: float
    discarded_games: int
    ambiguous_windows: int
    windows_missing_embedding: int
    degenerate_traces: int

    def table_row(self) -> str:
        tv = self.split_games
        return (
            f"{self.subcorpus_id:<12} {self.n_samples:>8} {self.n_games:>7}   "
            f"{tv.get('train', 0)} ({2 * tv.get('train', 0)}) / "
            f"{tv.get('valid', 0)} ({2 * tv.get('valid', 0)}) / "
            f"{tv.get('test', 0)} ({2 * tv.get('test', 0)})"
            f"   {self.binary_majority_pct:.2f}%"
        )


def format_stats_table(stats_list) -> str:
    header = (
        f"{'subcorpus':<12} {'#samples':>8} {'#games':>7}   "
        f"#train / valid / test   Binary Majority"
    )
    return "\n".join([header] + [s.table_row() for s in stats_list])


def prepare(
    manifest: Manifest,
    traces,
    table: EmbeddingTable,
    config: LabelingConfig | None = None,
) -> tuple[LabeledDataset, PrepareStats]:
    """Run the full labelling pipeline against one subcorpus.

    ``traces`` is any iterable of AnnotationTrace; traces for games absent from
    the manifest are ignored. Windows without a matching embedding record are
    dropped (counted in the stats); games falling below the per-class minimum
    are discarded; an empty result raises PipelineError.
    """
    manifest.validate()
    table.validate()
    if config is None:
        config = LabelingConfig(
            epsilon=manifest.labeling.epsilon,
            min_samples_per_class=manifest.labeling.min_samples_per_class,
        )
    config.validate()

    known_games = {g.game_id for g in manifest.games}
    by_game: dict[int, list[AnnotationTrace]] = {}
    degenerate = 0
    for t in traces:
        if t.game_id not in known_games:
            continue
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DegenerateTraceWarning)
            norm = normalize_trace(t)
        degenerate += sum(1 for w in caught if issubclass(w.category, DegenerateTraceWarning))
        by_game.setdefault(t.game_id, []).append(norm)

    if not by_game:
        raise PipelineError("no traces match any manifest game")

    # Per-game window means, plus the pooled values that define the median.
    game_windows: dict[int, list[tuple[int, float]]] = {}
    pooled: list[float] = []
    for gid, game_traces in sorted(by_game.items()):
        ticks, med = median_trace(game_traces, resample_hz=config.resample_hz)
        wins = window_average(
            ticks, med, window_s=config.window_s, reaction_shift_s=config.reaction_shift_s
        )
        game_windows[gid] = wins
        pooled.extend(v for _, v in wins)
    e_bar = subcorpus_median(pooled)

    lookup = table.index()
    samples: list[LabeledSample] = []
    ambiguous = 0
    missing_embedding = 0
    for gid in sorted(game_windows):
        for win_idx, e in game_windows[gid]:
            y = binarize(e, e_bar, config.epsilon)
            if y is None:
                ambiguous += 1
                continue
            key = (gid, win_idx)
            if key not in lookup:
                missing_embedding += 1
                continue
            samples.append(
                LabeledSample(
                    game_id=gid,
                    window_index=win_idx,
                    engagement_mean=e,
                    y_binary=y,
                    y_class=relabel(y, gid),
                    vector=table.vectors[lookup[key]],
                )
            )
    if missing_embedding:
        warnings.warn(f"{missing_embedding} labelled windows had no embedding record")
    if not samples:
        raise PipelineError("binarisation left no samples (epsilon dead zone too wide?)")

    games_before = {s.game_id for s in samples}
    samples = filter_games(samples, config.min_samples_per_class)
    retained = {s.game_id for s in samples}

    kept_games = tuple(g for g in manifest.games if g.game_id in retained)
    split_games = {sp: sum(1 for g in kept_games if g.split == sp) for sp in ("train", "valid", "test")}
    metadata = dict(manifest.metadata)
    metadata["subcorpus_median"] = e_bar
    dataset = LabeledDataset(
        manifest=Manifest(
            subcorpus_id=manifest.subcorpus_id,
            games=kept_games,
            labeling=LabelingDefaults(
                epsilon=config.epsilon, min_samples_per_class=config.min_samples_per_class
            ),
            paths=manifest.paths,
            metadata=metadata,
        ),
        samples=tuple(samples),
        subcorpus_median=e_bar,
    ).validate()

    n_high = sum(1 for s in samples if s.y_binary == 1)
    majority = max(n_high, len(samples) - n_high) / len(samples) * 100.0
    stats = PrepareStats(
        subcorpus_id=manifest.subcorpus_id,
        n_samples=len(samples),
        n_games=len(retained),
        split_games=split_games,
        binary_majority_pct=majority,
        subcorpus_median=e_bar,
        discarded_games=len(games_before - retained) + len(known_games - games_before),
        ambiguous_windows=ambiguous,
        windows_missing_embedding=missing_embedding,
        degenerate_traces=degenerate,
    )
    return dataset, stats


# ---------------------------------------------------------------------------
# trace file IO (CSV long format: one row per trace point)

def read_traces_csv(path) -> list[AnnotationTrace]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != TRACES_HEADER:
        raise FormatError(f"{path}: traces header must be {TRACES_HEADER!r}")
    points: dict[tuple[int, int], list[tuple[float, float]]] = {}
    for ln, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise FormatError(f"{path} line {ln}: expected 4 fields, got {len(parts)}")
        key = (int(parts[0]), int(parts[1]))
        points.setdefault(key, []).append((float(parts[2]), float(parts[3])))
    traces = []
    for (gid, aid), pts in sorted(points.items()):
        pts.sort(key=lambda p: p[0])
        traces.append(
            AnnotationTrace(
                game_id=gid,
                annotator_id=aid,
                times=np.array([p[0] for p in pts]),
                values=np.array([p[1] for p in pts]),
            ).validate()
        )
    return traces


def write_traces_csv(traces, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(TRACES_HEADER + "\n")
        for t in traces:
            for time_s, value in zip(t.times, t.values):
                fh.write(f"{t.game_id},{t.annotator_id},{repr(float(time_s))},{repr(float(value))}\n")
