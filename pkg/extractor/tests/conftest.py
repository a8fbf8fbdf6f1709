import pytest

pytest.importorskip("cv2")
pytest.importorskip("torch")

from helpers import export_toy_backbone, write_clip  # noqa: E402


@pytest.fixture(scope="session")
def weights_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("weights")
    export_toy_backbone(d / "i3d.pt", 512)
    export_toy_backbone(d / "videomae.pt", 768)
    return d


@pytest.fixture(scope="session")
def clip_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("clips")
    write_clip(d / "0_alpha.mp4", seconds=60, fps=30)
    write_clip(d / "1_beta.mp4", seconds=3, fps=30)
    return d
