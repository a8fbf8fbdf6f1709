"""End-to-end extraction: the produced table must load cleanly in the
modelling package (the EMB1 contract is the only interface between the two).
"""

import numpy as np
import pytest

from clipembed.backbones import load_backbone
from clipembed.cli import run_command
from clipembed.config import ExtractionConfig, ExtractorError, WeightsNotFoundError
from clipembed.extract import extract, game_id_of, write_embedding_table

domainshot_formats = pytest.importorskip(
    "domainshot.formats", reason="primary package validates the output tables"
)

from helpers import export_toy_backbone, write_clip  # noqa: E402


def test_sixty_second_clip_yields_sixty_records_i3d(clip_dir, weights_dir, tmp_path):
    backbone = load_backbone("i3d", weights_dir)
    out = tmp_path / "i3d.emb"
    report = extract(clip_dir, backbone, ExtractionConfig(backbone="i3d"), out)
    table = domainshot_formats.read_embedding_table(out)  # validates internally
    assert table.dim == 512
    clip0 = table.window_indices[table.game_ids == 0]
    assert len(clip0) == 60
    assert sorted(clip0.tolist()) == list(range(60))
    assert not report.failed_clips


def test_videomae_dim_768(clip_dir, weights_dir, tmp_path):
    backbone = load_backbone("videomae", weights_dir)
    out = tmp_path / "vm.emb"
    extract(clip_dir, backbone, ExtractionConfig(backbone="videomae"), out)
    table = domainshot_formats.read_embedding_table(out)
    assert table.dim == 768
    assert np.all(np.isfinite(table.vectors))


def test_record_count_is_sum_of_floor_durations(clip_dir, weights_dir, tmp_path):
    backbone = load_backbone("i3d", weights_dir)
    report = extract(clip_dir, backbone, ExtractionConfig(), tmp_path / "t.emb")
    # 60 s clip + 3 s clip at 1 s windows
    assert report.records == 60 + 3


def test_extraction_deterministic(clip_dir, weights_dir, tmp_path):
    backbone = load_backbone("i3d", weights_dir)
    paths = [tmp_path / "a.emb", tmp_path / "b.emb"]
    for p in paths:
        extract(clip_dir, backbone, ExtractionConfig(), p)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_missing_weights_give_fetch_instructions(tmp_path):
    with pytest.raises(WeightsNotFoundError) as err:
        load_backbone("mvd", tmp_path)
    msg = str(err.value)
    assert "torch.jit.trace" in msg and "768" in msg


def test_wrong_output_dim_rejected(tmp_path):
    export_toy_backbone(tmp_path / "i3d.pt", 300)  # i3d must emit 512
    with pytest.raises(ExtractorError):
        load_backbone("i3d", tmp_path)


def test_unknown_backbone_rejected(weights_dir):
    with pytest.raises(ExtractorError):
        load_backbone("slowfast", weights_dir)


def test_bad_filenames_logged_and_skipped(weights_dir, tmp_path):
    clips = tmp_path / "clips"
    clips.mkdir()
    write_clip(clips / "7_ok.mp4", seconds=2, fps=30)
    write_clip(clips / "noid.mp4", seconds=2, fps=30)
    backbone = load_backbone("i3d", weights_dir)
    report = extract(clips, backbone, ExtractionConfig(), tmp_path / "t.emb")
    assert report.records == 2  # only the well-named clip
    # clips iterate in sorted order: 7_ok.mp4 first, then the unnamed one
    assert [c.error is not None for c in report.clips] == [False, True]
    assert game_id_of(clips / "7_ok.mp4") == 7


def test_corrupt_clip_does_not_abort(weights_dir, tmp_path):
    clips = tmp_path / "clips"
    clips.mkdir()
    (clips / "1_corrupt.mp4").write_bytes(b"garbage")
    write_clip(clips / "2_fine.mp4", seconds=2, fps=30)
    backbone = load_backbone("i3d", weights_dir)
    report = extract(clips, backbone, ExtractionConfig(), tmp_path / "t.emb")
    assert report.records == 2
    assert len(report.failed_clips) == 1


def test_empty_directory_empty_table_nonzero_exit(weights_dir, tmp_path):
    empty = tmp_path / "none"
    empty.mkdir()
    out = tmp_path / "empty.emb"
    rc = run_command(
        ["extract", "--videos", str(empty), "--backbone", "i3d",
         "--weights-dir", str(weights_dir), "--out", str(out)]
    )
    assert rc == 1
    table = domainshot_formats.read_embedding_table(out)
    assert len(table) == 0 and table.dim == 512


def test_cli_end_to_end(clip_dir, weights_dir, tmp_path):
    out = tmp_path / "cli.emb"
    rc = run_command(
        ["extract", "--videos", str(clip_dir), "--backbone", "i3d",
         "--weights-dir", str(weights_dir), "--out", str(out)]
    )
    assert rc == 0
    assert domainshot_formats.read_embedding_table(out).dim == 512


def test_cli_missing_weights_exit_one(clip_dir, tmp_path):
    rc = run_command(
        ["extract", "--videos", str(clip_dir), "--backbone", "videomaev2",
         "--weights-dir", str(tmp_path), "--out", str(tmp_path / "x.emb")]
    )
    assert rc == 1


def test_writer_matches_primary_reader_bitwise(tmp_path):
    rng = np.random.default_rng(1)
    records = [(3, w, rng.normal(size=5).astype(np.float32)) for w in range(4)]
    path = tmp_path / "t.emb"
    write_embedding_table(5, records, path)
    table = domainshot_formats.read_embedding_table(path)
    for (gid, win, vec), i in zip(records, range(4)):
        assert (table.game_ids[i], table.window_indices[i]) == (gid, win)
        assert table.vectors[i].tobytes() == vec.tobytes()
