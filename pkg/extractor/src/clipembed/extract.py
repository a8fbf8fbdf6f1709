"""Directory-of-clips -> EMB1 embedding table.

Clip filenames must start with the integer game id (``03_doom.mp4``,
``7.avi``); anything else is logged and skipped. Per-clip decode failures are
logged and extraction continues. The output is the little-endian binary
table: magic "EMB1" | u32 dim | u64 record_count | records of
[u32 game_id | u32 window_index | dim x f32] - the contract the modelling
package loads.
"""

from __future__ import annotations

import logging
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backbones import TorchScriptBackbone
from .config import ExtractionConfig
from .frames import iter_windows, sample_frames

log = logging.getLogger("clipembed")

VIDEO_EXTENSIONS = (".mp4", ".avi", ".mkv", ".mov", ".webm")
_GAME_ID = re.compile(r"^(\d+)")

EMB_MAGIC = b"EMB1"


@dataclass
class ClipResult:
    path: str
    game_id: int | None
    windows: int = 0
    error: str | None = None


@dataclass
class ExtractionReport:
    dim: int
    records: int = 0
    clips: list[ClipResult] = field(default_factory=list)

    @property
    def failed_clips(self) -> list[ClipResult]:
        return [c for c in self.clips if c.error]


def write_embedding_table(dim: int, records, path) -> None:
    """records: iterable of (game_id, window_index, float32 vector of len dim)."""
    with open(path, "wb") as fh:
        records = list(records)
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<IQ", dim, len(records)))
        for game_id, window_index, vec in records:
            fh.write(struct.pack("<II", int(game_id), int(window_index)))
            fh.write(np.ascontiguousarray(vec, dtype="<f4").tobytes())


def game_id_of(path: Path) -> int | None:
    m = _GAME_ID.match(path.stem)
    return int(m.group(1)) if m else None


def iter_clips(videos_dir) -> list[Path]:
    root = Path(videos_dir)
    return sorted(p for p in root.iterdir() if p.suffix.lower() in VIDEO_EXTENSIONS)


def extract(videos_dir, backbone: TorchScriptBackbone, config: ExtractionConfig, out_path) -> ExtractionReport:
    """Embed every complete window of every clip; write the table; report."""
    config.validate()
    report = ExtractionReport(dim=backbone.dim)
    records = []
    for clip in iter_clips(videos_dir):
        gid = game_id_of(clip)
        result = ClipResult(path=str(clip), game_id=gid)
        report.clips.append(result)
        if gid is None:
            result.error = "filename does not start with a game id"
            log.warning("skipping %s: %s", clip.name, result.error)
            continue
        try:
            for window_index, raw in iter_windows(clip, config):
                frames = sample_frames(raw, config)
                records.append((gid, window_index, backbone.embed(frames)))
                result.windows += 1
        except Exception as exc:
            result.error = str(exc)
            log.warning("clip %s failed after %d windows: %s", clip.name, result.windows, exc)
            continue
    report.records = len(records)
    write_embedding_table(backbone.dim, records, out_path)
    return report
