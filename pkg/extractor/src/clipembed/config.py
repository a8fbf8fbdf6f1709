"""Extraction configuration and the backbone registry."""

from __future__ import annotations

from dataclasses import dataclass


class ExtractorError(Exception):
    """Base class for extraction failures."""


class WeightsNotFoundError(ExtractorError):
    """A backbone checkpoint file is missing; the message carries fetch steps."""


#: every supported backbone consumes 16 frames of 224x224x3
FRAMES_PER_WINDOW = 16
FRAME_SIZE = 224

_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class BackboneSpec:
    name: str
    dim: int
    mean: tuple[float, float, float]  # per-channel, applied on [0, 1] floats
    std: tuple[float, float, float]
    source: str                       # where the published checkpoint lives


BACKBONES = {
    "i3d": BackboneSpec(
        name="i3d", dim=512, mean=(0.5, 0.5, 0.5), std=(0.5, 0.5, 0.5),
        source="Kinetics-pretrained I3D (e.g. torchvision / pytorchvideo exports)",
    ),
    "mvd": BackboneSpec(
        name="mvd", dim=768, mean=_IMAGENET_MEAN, std=_IMAGENET_STD,
        source="MVD base, Kinetics-pretrained (github.com/ruiwang2021/mvd)",
    ),
    "videomae": BackboneSpec(
        name="videomae", dim=768, mean=_IMAGENET_MEAN, std=_IMAGENET_STD,
        source="VideoMAE base, Kinetics-pretrained (huggingface MCG-NJU/videomae-base)",
    ),
    "videomaev2": BackboneSpec(
        name="videomaev2", dim=768, mean=_IMAGENET_MEAN, std=_IMAGENET_STD,
        source="VideoMAEv2 base, Kinetics-pretrained (github.com/OpenGVLab/VideoMAEv2)",
    ),
}


@dataclass(frozen=True)
class ExtractionConfig:
    backbone: str = "i3d"
    window_s: float = 1.0
    device: str = "cpu"
    frames_per_window: int = FRAMES_PER_WINDOW
    frame_size: int = FRAME_SIZE

    def validate(self) -> "ExtractionConfig":
        if self.backbone not in BACKBONES:
            raise ExtractorError(
                f"unknown backbone {self.backbone!r}; choose from {sorted(BACKBONES)}"
            )
        if self.frames_per_window != FRAMES_PER_WINDOW or self.frame_size != FRAME_SIZE:
            raise ExtractorError(
                f"backbone input contract is fixed at {FRAMES_PER_WINDOW} frames of "
                f"{FRAME_SIZE}x{FRAME_SIZE}"
            )
        if self.window_s <= 0:
            raise ExtractorError("window_s must be positive")
        return self

    @property
    def spec(self) -> BackboneSpec:
        return BACKBONES[self.backbone]
