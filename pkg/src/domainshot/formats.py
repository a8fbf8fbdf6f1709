"""Bit-exact file formats.

Embedding table (binary), little-endian throughout::

    magic "EMB1" | u32 dim | u64 record_count |
    record_count x [u32 game_id | u32 window_index | dim x f32 vector]

A CSV mirror with header ``game_id,window_index,v0,...,v{D-1}`` is accepted
by :func:`read_embedding_table` for debugging; the writer always emits binary
unless asked for the mirror explicitly.

Checkpoint (binary)::

    magic "PRJ1" | u32 d_in | u32 d_out | d_out*d_in x f32 W row-major |
    d_out x f32 b | u32 metadata_len | metadata JSON (UTF-8)

Labels file: CSV with header ``game_id,window_index,engagement_mean,y_binary,y_class``.
Manifest: one JSON document. A labelled dataset on disk is a directory holding
``manifest.json`` + ``labels.csv`` + the embeddings file the manifest points at.

Floats in CSV are written with ``repr`` (shortest round-trip form), so writers
are byte-deterministic and readers recover exact float64 values.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .data import (
    BaselineCheckpoint,
    EmbeddingTable,
    GameEntry,
    LabeledDataset,
    LabeledSample,
    LabelingDefaults,
    Manifest,
    ManifestPaths,
    ProjectionCheckpoint,
)
from .errors import FormatError, ValidationError

EMB_MAGIC = b"EMB1"
PRJ_MAGIC = b"PRJ1"
BAS_MAGIC = b"BAS1"
LABELS_HEADER = "game_id,window_index,engagement_mean,y_binary,y_class"


# ---------------------------------------------------------------------------
# embedding tables

def _record_dtype(dim: int) -> np.dtype:
    # packed little-endian record layout: u32 | u32 | dim x f32
    return np.dtype([("game_id", "<u4"), ("window_index", "<u4"), ("vector", "<f4", (dim,))])


def write_embedding_table(table: EmbeddingTable, path) -> None:
    table.validate()
    records = np.empty(len(table), dtype=_record_dtype(table.dim))
    records["game_id"] = table.game_ids
    records["window_index"] = table.window_indices
    records["vector"] = table.vectors
    with open(path, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<IQ", table.dim, len(table)))
        fh.write(records.tobytes())


def write_embedding_table_csv(table: EmbeddingTable, path) -> None:
    table.validate()
    with open(path, "w", newline="\n") as fh:
        cols = ",".join(f"v{i}" for i in range(table.dim))
        fh.write(f"game_id,window_index,{cols}\n")
        for gid, win, vec in zip(table.game_ids, table.window_indices, table.vectors):
            vals = ",".join(repr(float(v)) for v in vec)
            fh.write(f"{int(gid)},{int(win)},{vals}\n")


def read_embedding_table(path) -> EmbeddingTable:
    raw = Path(path).read_bytes()
    if raw[:4] == EMB_MAGIC:
        return _read_embedding_binary(raw).validate()
    head = raw[:256].decode("utf-8", errors="replace")
    if head.startswith("game_id,window_index,"):
        return _read_embedding_csv(raw).validate()
    raise FormatError(f"{path}: bad magic bytes {raw[:4]!r} (expected {EMB_MAGIC!r} or CSV header)")


def _read_embedding_binary(raw: bytes) -> EmbeddingTable:
    if len(raw) < 16:
        raise FormatError("embedding file truncated before header")
    dim, count = struct.unpack_from("<IQ", raw, 4)
    if dim == 0:
        raise FormatError("embedding table declares dim == 0")
    record_size = 8 + 4 * dim
    body = raw[16:]
    if len(body) != count * record_size:
        raise FormatError(
            f"embedding record section holds {len(body)} bytes, expected "
            f"{count} records x {record_size} bytes"
        )
    records = np.frombuffer(body, dtype=_record_dtype(int(dim)), count=count)
    return EmbeddingTable(
        dim=int(dim),
        game_ids=records["game_id"],
        window_indices=records["window_index"],
        vectors=records["vector"].reshape(count, dim),
    )


def _read_embedding_csv(raw: bytes) -> EmbeddingTable:
    lines = raw.decode("utf-8").splitlines()
    header = lines[0].split(",")
    dim = len(header) - 2
    if dim <= 0 or header[: 2] != ["game_id", "window_index"]:
        raise FormatError("embedding CSV header malformed")
    records = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != dim + 2:
            raise FormatError(f"embedding CSV line {ln}: expected {dim + 2} fields, got {len(parts)}")
        records.append((int(parts[0]), int(parts[1]), [float(v) for v in parts[2:]]))
    return EmbeddingTable.from_records(dim, records)


# ---------------------------------------------------------------------------
# manifests

def manifest_to_dict(manifest: Manifest) -> dict:
    return {
        "subcorpus_id": manifest.subcorpus_id,
        "games": [
            {"game_id": g.game_id, "name": g.name, "split": g.split} for g in manifest.games
        ],
        "labeling": {
            "epsilon": manifest.labeling.epsilon,
            "min_samples_per_class": manifest.labeling.min_samples_per_class,
        },
        "paths": {"embeddings": manifest.paths.embeddings, "traces": manifest.paths.traces},
        "metadata": dict(manifest.metadata),
    }


def manifest_from_dict(doc: dict) -> Manifest:
    try:
        games = tuple(
            GameEntry(game_id=int(g["game_id"]), name=str(g["name"]), split=str(g["split"]))
            for g in doc["games"]
        )
        manifest = Manifest(
            subcorpus_id=str(doc["subcorpus_id"]),
            games=games,
            labeling=LabelingDefaults(
                epsilon=float(doc["labeling"]["epsilon"]),
                min_samples_per_class=int(doc["labeling"]["min_samples_per_class"]),
            ),
            paths=ManifestPaths(
                embeddings=str(doc["paths"]["embeddings"]),
                traces=str(doc["paths"].get("traces", "")),
            ),
            metadata=doc.get("metadata", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"manifest document malformed: {exc}") from exc
    return manifest.validate()


def write_manifest(manifest: Manifest, path) -> None:
    Path(path).write_text(canonical_json(manifest_to_dict(manifest)) + "\n")


def read_manifest(path) -> Manifest:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    return manifest_from_dict(doc)


# ---------------------------------------------------------------------------
# labels files

def write_labels_csv(samples, path_or_buf) -> None:
    """Rows ordered as given; float engagement means via repr for exactness."""
    own = not hasattr(path_or_buf, "write")
    fh = open(path_or_buf, "w", newline="\n") if own else path_or_buf
    try:
        fh.write(LABELS_HEADER + "\n")
        for s in samples:
            fh.write(
                f"{s.game_id},{s.window_index},{repr(float(s.engagement_mean))},"
                f"{s.y_binary},{s.y_class}\n"
            )
    finally:
        if own:
            fh.close()


def read_labels_csv(path) -> list[dict]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != LABELS_HEADER:
        raise FormatError(f"{path}: labels header must be {LABELS_HEADER!r}")
    rows = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise FormatError(f"{path} line {ln}: expected 5 fields, got {len(parts)}")
        rows.append(
            {
                "game_id": int(parts[0]),
                "window_index": int(parts[1]),
                "engagement_mean": float(parts[2]),
                "y_binary": int(parts[3]),
                "y_class": int(parts[4]),
            }
        )
    return rows


# ---------------------------------------------------------------------------
# labelled datasets (directory layout)

def write_labeled_dataset(dataset: LabeledDataset, out_dir) -> Path:
    """Write manifest.json + labels.csv + embeddings.emb for the retained samples."""
    dataset.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = EmbeddingTable.from_records(
        dim=len(dataset.samples[0].vector),
        records=[(s.game_id, s.window_index, s.vector) for s in dataset.samples],
    )
    write_embedding_table(table, out / "embeddings.emb")
    write_labels_csv(dataset.samples, out / "labels.csv")
    metadata = dict(dataset.manifest.metadata)
    metadata["subcorpus_median"] = dataset.subcorpus_median
    manifest = Manifest(
        subcorpus_id=dataset.manifest.subcorpus_id,
        games=dataset.manifest.games,
        labeling=dataset.manifest.labeling,
        paths=ManifestPaths(embeddings="embeddings.emb", traces=dataset.manifest.paths.traces),
        metadata=metadata,
    )
    write_manifest(manifest, out / "manifest.json")
    return out


def read_labeled_dataset(path) -> LabeledDataset:
    """Load a dataset directory (or a manifest.json path) and validate it."""
    p = Path(path)
    manifest_path = p / "manifest.json" if p.is_dir() else p
    manifest = read_manifest(manifest_path)
    base = manifest_path.parent
    table = read_embedding_table(_resolve(base, manifest.paths.embeddings))
    rows = read_labels_csv(base / "labels.csv")
    lookup = table.index()
    samples = []
    for r in rows:
        key = (r["game_id"], r["window_index"])
        if key not in lookup:
            raise ValidationError(
                f"labels row for game {key[0]} window {key[1]} has no matching embedding record"
            )
        samples.append(
            LabeledSample(
                game_id=r["game_id"],
                window_index=r["window_index"],
                engagement_mean=r["engagement_mean"],
                y_binary=r["y_binary"],
                y_class=r["y_class"],
                vector=table.vectors[lookup[key]],
            )
        )
    median = manifest.metadata.get("subcorpus_median")
    if median is None:
        raise ValidationError(
            f"{manifest_path}: manifest metadata lacks 'subcorpus_median'; cannot "
            f"re-check the binarisation rule"
        )
    return LabeledDataset(
        manifest=manifest, samples=tuple(samples), subcorpus_median=float(median)
    ).validate()


def _resolve(base: Path, ref: str) -> Path:
    ref_path = Path(ref)
    return ref_path if ref_path.is_absolute() else base / ref_path


# ---------------------------------------------------------------------------
# projection checkpoints

def write_checkpoint(ckpt: ProjectionCheckpoint, path) -> None:
    ckpt.validate()
    meta = canonical_json(dict(ckpt.metadata)).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(PRJ_MAGIC)
        fh.write(struct.pack("<II", ckpt.d_in, ckpt.d_out))
        fh.write(ckpt.W.astype("<f4").tobytes())
        fh.write(ckpt.b.astype("<f4").tobytes())
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)


def read_checkpoint(path) -> ProjectionCheckpoint:
    raw = Path(path).read_bytes()
    if raw[:4] != PRJ_MAGIC:
        raise FormatError(f"{path}: bad magic bytes {raw[:4]!r} (expected {PRJ_MAGIC!r})")
    if len(raw) < 12:
        raise FormatError(f"{path}: truncated checkpoint header")
    d_in, d_out = struct.unpack_from("<II", raw, 4)
    w_bytes = 4 * d_in * d_out
    b_bytes = 4 * d_out
    need = 12 + w_bytes + b_bytes + 4
    if len(raw) < need:
        raise FormatError(f"{path}: truncated parameter section")
    W = np.frombuffer(raw, dtype="<f4", count=d_in * d_out, offset=12).reshape(d_out, d_in)
    b = np.frombuffer(raw, dtype="<f4", count=d_out, offset=12 + w_bytes)
    (meta_len,) = struct.unpack_from("<I", raw, 12 + w_bytes + b_bytes)
    meta_raw = raw[need : need + meta_len]
    if len(meta_raw) != meta_len:
        raise FormatError(f"{path}: truncated metadata section")
    metadata = json.loads(meta_raw.decode("utf-8")) if meta_len else {}
    return ProjectionCheckpoint(W=W, b=b, metadata=metadata).validate()


def write_baseline_checkpoint(ckpt: BaselineCheckpoint, path) -> None:
    """BAS1 | u32 dim | W | b | V | c (all f32 LE) | u32 len | metadata JSON."""
    ckpt.validate()
    meta = canonical_json(dict(ckpt.metadata)).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(BAS_MAGIC)
        fh.write(struct.pack("<I", ckpt.dim))
        for block in (ckpt.W, ckpt.b, ckpt.V, ckpt.c):
            fh.write(block.astype("<f4").tobytes())
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)


def read_baseline_checkpoint(path) -> BaselineCheckpoint:
    raw = Path(path).read_bytes()
    if raw[:4] != BAS_MAGIC:
        raise FormatError(f"{path}: bad magic bytes {raw[:4]!r} (expected {BAS_MAGIC!r})")
    if len(raw) < 8:
        raise FormatError(f"{path}: truncated header")
    (d,) = struct.unpack_from("<I", raw, 4)
    sizes = [d * d, d, 2 * d, 2]
    need = 8 + 4 * sum(sizes) + 4
    if len(raw) < need:
        raise FormatError(f"{path}: truncated parameter section")
    off = 8
    blocks = []
    for size in sizes:
        blocks.append(np.frombuffer(raw, dtype="<f4", count=size, offset=off))
        off += 4 * size
    (meta_len,) = struct.unpack_from("<I", raw, off)
    meta_raw = raw[off + 4 : off + 4 + meta_len]
    if len(meta_raw) != meta_len:
        raise FormatError(f"{path}: truncated metadata section")
    metadata = json.loads(meta_raw.decode("utf-8")) if meta_len else {}
    return BaselineCheckpoint(
        W=blocks[0].reshape(d, d), b=blocks[1], V=blocks[2].reshape(2, d), c=blocks[3],
        metadata=metadata,
    ).validate()


def checkpoint_kind(path) -> str:
    """'projection' | 'baseline' based on the file magic."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == PRJ_MAGIC:
        return "projection"
    if magic == BAS_MAGIC:
        return "baseline"
    raise FormatError(f"{path}: bad magic bytes {magic!r}")


# ---------------------------------------------------------------------------
# structured reports

def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, fixed separators, no trailing spaces."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_report(path, payload: dict, *, config: dict, input_paths=(), timestamp: str = "") -> None:
    """Write a report document.

    The timestamp lives in its own top-level field so reports are
    byte-identical across reruns once it is dropped.
    """
    from . import __version__

    doc = {
        "tool": {"name": "domainshot", "version": __version__},
        "config": config,
        "inputs": {str(p): sha256_file(p) for p in input_paths},
        "payload": payload,
        "timestamp": timestamp,
    }
    Path(path).write_text(canonical_json(doc) + "\n")


def read_report(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
