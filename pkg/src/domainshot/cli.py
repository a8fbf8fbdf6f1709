"""Command-line entry point.

Subcommands: prepare, synth, train, eval, run-matrix, compare, gradcheck.
Exit codes: 0 success; 1 validation / format / infeasible-spec errors;
2 runtime errors. All randomness is traceable to --seed; no environment
variables are consulted. Every command that writes artifacts drops a config
echo (JSON of all effective values) next to them, and every JSON report
embeds the tool version, effective config, and input file hashes. Timestamps
live in their own field so reports are byte-reproducible without them.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .baseline import BaselineModel, eval_binary, train_baseline
from .data import LabeledDataset, Manifest
from .episodes import EpisodeSpec
from .errors import DomainshotError, FormatError, SamplerError, ValidationError
from .evaluation import (
    RunReport,
    RunResult,
    aggregate,
    compare,
    evaluate_episodic,
    format_matrix_table,
    run_matrix,
)
from .formats import (
    canonical_json,
    checkpoint_kind,
    read_baseline_checkpoint,
    read_checkpoint,
    read_embedding_table,
    read_labeled_dataset,
    read_manifest,
    read_report,
    sha256_file,
    write_baseline_checkpoint,
    write_checkpoint,
    write_labeled_dataset,
    write_report,
)
from .gradcheck import run_all
from .labeling import LabelingConfig, format_stats_table, prepare, read_traces_csv
from .losses import LossConfig
from .synth import SynthConfig, generate
from .training import TrainConfig, train_fsl


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _echo_config(target: Path, command: str, args: argparse.Namespace, input_paths=()) -> dict:
    config = {"command": command, "tool_version": __version__}
    config.update({k: v for k, v in sorted(vars(args).items()) if k != "func"})
    doc = {
        "config": config,
        "inputs": {str(p): sha256_file(p) for p in input_paths if Path(p).exists()},
        "timestamp": _now(),
    }
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(canonical_json(doc) + "\n")
    return config


def _dataset_input_paths(data_dir: Path) -> list[Path]:
    paths = [data_dir / "manifest.json", data_dir / "labels.csv"]
    manifest = read_manifest(data_dir / "manifest.json")
    emb = Path(manifest.paths.embeddings)
    paths.append(emb if emb.is_absolute() else data_dir / emb)
    return [p for p in paths if p.exists()]


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok]
    except ValueError as exc:
        raise ValidationError(f"expected a comma-separated integer list, got {text!r}") from exc


# ---------------------------------------------------------------------------
# subcommands

def cmd_prepare(args) -> int:
    manifest = read_manifest(args.manifest)
    traces_path = args.traces or manifest.paths.traces
    embeddings_path = args.embeddings or manifest.paths.embeddings
    if not traces_path or not embeddings_path:
        raise ValidationError("traces/embeddings paths must come from flags or the manifest")
    base = Path(args.manifest).parent
    traces = read_traces_csv(Path(traces_path) if Path(traces_path).is_absolute() else base / traces_path)
    table = read_embedding_table(
        Path(embeddings_path) if Path(embeddings_path).is_absolute() else base / embeddings_path
    )
    config = LabelingConfig(
        epsilon=manifest.labeling.epsilon if args.epsilon is None else args.epsilon,
        min_samples_per_class=(
            manifest.labeling.min_samples_per_class if args.min_per_class is None else args.min_per_class
        ),
        resample_hz=args.resample_hz,
        reaction_shift_s=args.reaction_shift,
        window_s=args.window,
    )
    dataset, stats = prepare(manifest, traces, table, config)
    metadata = dict(dataset.manifest.metadata)
    metadata["prepare_stats"] = {
        "n_samples": stats.n_samples,
        "n_games": stats.n_games,
        "split_games": stats.split_games,
        "binary_majority_pct": stats.binary_majority_pct,
        "discarded_games": stats.discarded_games,
        "ambiguous_windows": stats.ambiguous_windows,
        "windows_missing_embedding": stats.windows_missing_embedding,
        "degenerate_traces": stats.degenerate_traces,
    }
    dataset = LabeledDataset(
        manifest=Manifest(
            subcorpus_id=dataset.manifest.subcorpus_id,
            games=dataset.manifest.games,
            labeling=dataset.manifest.labeling,
            paths=dataset.manifest.paths,
            metadata=metadata,
        ),
        samples=dataset.samples,
        subcorpus_median=dataset.subcorpus_median,
    )
    out = write_labeled_dataset(dataset, args.out)
    _echo_config(
        out / "config_echo.json", "prepare", args,
        input_paths=[Path(args.manifest), base / traces_path, base / embeddings_path],
    )
    if args.format == "structured":
        print(canonical_json(metadata["prepare_stats"]))
    else:
        print(format_stats_table([stats]))
        print(f"dataset written to {out}")
    return 0


def cmd_synth(args) -> int:
    split_counts = _parse_int_list(args.splits)
    if len(split_counts) != 3:
        raise ValidationError("--splits needs exactly three comma-separated counts")
    config = SynthConfig(
        n_domains=args.domains,
        samples_per_class=args.per_class,
        dim=args.dim,
        cluster_spread=args.sigma,
        inter_class_gap=args.gap,
        flip_fraction=args.flip,
        split_counts=tuple(split_counts),
        seed=args.seed,
        epsilon=args.epsilon,
    )
    _, dataset = generate(config)
    out = write_labeled_dataset(dataset, args.out)
    _echo_config(out / "config_echo.json", "synth", args)
    truth = dataset.manifest.metadata["ground_truth"]
    if args.format == "structured":
        print(canonical_json(truth))
    else:
        print(
            f"synth dataset: {truth['n_samples']} samples, {truth['n_games']} domains "
            f"(splits {truth['split_games']}), written to {out}"
        )
    return 0


def _train_config(args) -> TrainConfig:
    spec = EpisodeSpec(
        n_way=args.way, k_shot=args.shot, q_query=args.query, split="train", seed=args.seed
    )
    return TrainConfig(
        method=args.method,
        spec=spec,
        loss=LossConfig(distance=args.distance, tau=args.tau),
        lr0=args.lr,
        episodes_per_epoch=args.episodes_per_epoch,
        patience_epochs=args.patience,
        max_epochs=args.max_epochs,
        val_episodes_per_epoch=args.val_episodes,
        batch_size=args.batch_size,
        seed=args.seed,
        allow_lr_outside_range=args.allow_lr,
    )


def cmd_train(args) -> int:
    dataset = read_labeled_dataset(args.data)
    config = _train_config(args)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.method == "baseline":
        model, log = train_baseline(dataset, config)
        write_baseline_checkpoint(
            model.to_checkpoint(
                {"seed": config.seed, "method": "baseline", "config_hash": config.config_hash()}
            ),
            out,
        )
    else:
        ckpt, log = train_fsl(dataset, config)
        write_checkpoint(ckpt, out)
    write_report(
        Path(f"{out}.log.json"),
        log.to_payload(),
        config=asdict(config),
        input_paths=_dataset_input_paths(Path(args.data)),
        timestamp=_now(),
    )
    _echo_config(Path(f"{out}.config.json"), "train", args)
    if args.format == "structured":
        print(canonical_json(log.to_payload()))
    else:
        print(
            f"{args.method}: {log.epochs_run} epochs, best validation accuracy "
            f"{log.best_val_accuracy:.4f} at epoch {log.best_epoch}; checkpoint -> {out}"
        )
    return 0


def cmd_eval(args) -> int:
    dataset = read_labeled_dataset(args.data)
    kind = checkpoint_kind(args.ckpt)
    spec = EpisodeSpec(
        n_way=args.way, k_shot=args.shot, q_query=args.query, split="test", seed=args.seed
    )
    if kind == "projection":
        ckpt = read_checkpoint(args.ckpt)
        accs = evaluate_episodic(ckpt, dataset, spec, args.episodes, args.seed)
        report = aggregate(
            str(ckpt.metadata.get("method", "projection")),
            spec,
            [RunResult(seed=args.seed, episode_accuracies=tuple(float(a) for a in accs))],
            ci_unit=args.ci_unit,
        )
    else:
        model = BaselineModel.from_checkpoint(read_baseline_checkpoint(args.ckpt))
        acc = eval_binary(model, dataset, "test")
        report = aggregate(
            "baseline", spec, [RunResult(seed=args.seed, episode_accuracies=(acc,))],
            ci_unit=args.ci_unit,
        )
    payload = report.to_payload()
    payload["checkpoint_kind"] = kind
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_report(
        out,
        payload,
        config={k: v for k, v in sorted(vars(args).items()) if k != "func"},
        input_paths=[Path(args.ckpt)] + _dataset_input_paths(Path(args.data)),
        timestamp=_now(),
    )
    _echo_config(Path(f"{out}.config.json"), "eval", args)
    if args.format == "structured":
        print(canonical_json(payload))
    else:
        print(
            f"{report.method} {spec.n_way}w{spec.k_shot}s: mean accuracy "
            f"{report.mean_accuracy:.4f} ±{report.ci95_half_width:.4f} -> {out}"
        )
    return 0


def cmd_run_matrix(args) -> int:
    dataset = read_labeled_dataset(args.data)
    methods = [m for m in args.methods.split(",") if m]
    ways = _parse_int_list(args.ways)
    shots = _parse_int_list(args.shots)
    base = _train_config(argparse.Namespace(**{**vars(args), "method": "pn", "way": ways[0], "shot": shots[0]}))
    report = run_matrix(
        dataset,
        methods,
        ways,
        shots,
        base,
        runs=args.runs,
        test_episodes=args.test_episodes,
        threads=args.threads,
        ci_unit=args.ci_unit,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = _dataset_input_paths(Path(args.data))
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    write_report(out_dir / "matrix.json", report.to_payload(), config=config,
                 input_paths=inputs, timestamp=_now())
    for (m, w, s), cell in sorted(report.cells.items()):
        write_report(
            out_dir / f"cell_{m}_{w}w{s}s.json", cell.to_payload(), config=config,
            input_paths=inputs, timestamp=_now(),
        )
    table = format_matrix_table(report, methods, ways, shots)
    (out_dir / "table.txt").write_text(table + "\n")
    _echo_config(out_dir / "config_echo.json", "run-matrix", args)
    if args.format == "structured":
        print(canonical_json(report.to_payload()))
    else:
        print(table)
        if report.errors:
            print("cell errors:")
            for (m, w, s), err in sorted(report.errors.items()):
                print(f"  {m} {w}w{s}s: {err}")
        print(f"reports written to {out_dir}")
    return 0 if not report.errors else 2


def cmd_compare(args) -> int:
    rep_a = RunReport.from_payload(read_report(args.report_a)["payload"])
    rep_b = RunReport.from_payload(read_report(args.report_b)["payload"])
    verdict = compare(rep_a, rep_b)
    result = {
        "verdict": verdict,
        "a": {"method": rep_a.method, "mean": rep_a.mean_accuracy, "ci95": rep_a.ci95_half_width},
        "b": {"method": rep_b.method, "mean": rep_b.mean_accuracy, "ci95": rep_b.ci95_half_width},
    }
    if args.out_dir:
        _echo_config(Path(args.out_dir) / "config_echo.json", "compare", args)
    if args.format == "structured":
        print(canonical_json(result))
    else:
        label = {
            "on_par": "on par",
            "a_higher": f"{args.report_a} higher",
            "b_higher": f"{args.report_b} higher",
        }[verdict]
        print(
            f"{label}: {rep_a.method} {rep_a.mean_accuracy:.4f} ±{rep_a.ci95_half_width:.4f} "
            f"vs {rep_b.method} {rep_b.mean_accuracy:.4f} ±{rep_b.ci95_half_width:.4f}"
        )
    return 0


def cmd_gradcheck(args) -> int:
    dims = _parse_int_list(args.dim)
    results = run_all(dims=dims, trials=args.trials, seed=args.seed)
    ok = all(r.passed for r in results)
    if args.out_dir:
        _echo_config(Path(args.out_dir) / "config_echo.json", "gradcheck", args)
    if args.format == "structured":
        print(
            canonical_json(
                {
                    "passed": ok,
                    "results": [
                        {"name": r.name, "dim": r.dim, "trials": r.trials, "max_error": r.max_error,
                         "passed": r.passed}
                        for r in results
                    ],
                }
            )
        )
    else:
        for r in results:
            print(f"{r.name:22s} dim={r.dim:3d} trials={r.trials} max_rel_err={r.max_error:.3e} "
                  f"{'ok' if r.passed else 'FAIL'}")
        print("gradcheck:", "all passed" if ok else "FAILURES above")
    return 0 if ok else 2


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="root seed for every random stream")
    common.add_argument("--threads", type=int, default=1, help="parallel workers for run-matrix")
    common.add_argument("--out-dir", default=None, help="directory for config echoes of read-only commands")
    common.add_argument("--format", choices=("text", "structured"), default="text")

    parser = argparse.ArgumentParser(prog="domainshot", description=__doc__)
    parser.add_argument("--version", action="version", version=f"domainshot {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", parents=[common], help="traces + embeddings -> labelled dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--traces", default=None, help="override the manifest traces path")
    p.add_argument("--embeddings", default=None, help="override the manifest embeddings path")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--min-per-class", type=int, default=None)
    p.add_argument("--resample-hz", type=float, default=10.0)
    p.add_argument("--reaction-shift", type=float, default=1.0)
    p.add_argument("--window", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic multidomain dataset")
    p.add_argument("--domains", type=int, default=12)
    p.add_argument("--per-class", type=int, default=30)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--gap", type=float, default=1.0)
    p.add_argument("--flip", type=float, default=0.5)
    p.add_argument("--splits", default="4,4,4")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    train_common = argparse.ArgumentParser(add_help=False)
    train_common.add_argument("--query", type=int, default=5)
    train_common.add_argument("--lr", type=float, default=5e-3)
    train_common.add_argument("--allow-lr", action="store_true",
                              help="permit learning rates outside (1e-3,1e-2)")
    train_common.add_argument("--episodes-per-epoch", type=int, default=20)
    train_common.add_argument("--val-episodes", type=int, default=20)
    train_common.add_argument("--patience", type=int, default=10)
    train_common.add_argument("--max-epochs", type=int, default=200)
    train_common.add_argument("--batch-size", type=int, default=32)
    train_common.add_argument("--tau", type=float, default=0.07)
    train_common.add_argument("--distance", choices=("euclidean", "squared-euclidean"),
                              default="euclidean")

    p = sub.add_parser("train", parents=[common, train_common], help="train one model")
    p.add_argument("--method", required=True, choices=("pn", "mn", "sc", "baseline"))
    p.add_argument("--way", type=int, default=5)
    p.add_argument("--shot", type=int, default=5)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on the test split")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--way", type=int, default=5)
    p.add_argument("--shot", type=int, default=5)
    p.add_argument("--query", type=int, default=5)
    p.add_argument("--episodes", type=int, default=200)
    p.add_argument("--ci-unit", choices=("episode", "run"), default="episode")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run-matrix", parents=[common, train_common],
                       help="full methods x ways x shots experiment grid")
    p.add_argument("--data", required=True)
    p.add_argument("--methods", default="pn,mn,sc,baseline")
    p.add_argument("--ways", default="5,10")
    p.add_argument("--shots", default="1,5")
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--test-episodes", type=int, default=200)
    p.add_argument("--ci-unit", choices=("episode", "run"), default="episode")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run_matrix)

    p = sub.add_parser("compare", parents=[common], help="compare two report files")
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gradcheck", parents=[common],
                       help="finite-difference verification of all gradients")
    p.add_argument("--dim", default="3,8,32", help="comma-separated dims to check")
    p.add_argument("--trials", type=int, default=50)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def run_command(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors (unknown flags etc.); that is a
        # validation failure under this tool's exit-code contract
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except (ValidationError, FormatError, SamplerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DomainshotError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"unexpected error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
