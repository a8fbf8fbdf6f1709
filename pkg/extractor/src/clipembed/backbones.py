"""Frozen video backbones, consumed as TorchScript exports.

A backbone file is ``<weights_dir>/<name>.pt``: a TorchScript module mapping a
float32 tensor of shape (1, 3, 16, 224, 224) (channels-first, normalised) to a
(1, dim) or (dim,) embedding. Published checkpoints are exported once with
``torch.jit.trace(model, example)`` and reused; nothing is trained here.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .config import BACKBONES, BackboneSpec, ExtractorError, WeightsNotFoundError


class TorchScriptBackbone:
    """Wraps a scripted module behind the frames -> vector contract."""

    def __init__(self, spec: BackboneSpec, module, device: str = "cpu"):
        self.spec = spec
        self.device = device
        self._module = module.to(device).eval()
        self._mean = torch.tensor(spec.mean).view(1, 3, 1, 1, 1)
        self._std = torch.tensor(spec.std).view(1, 3, 1, 1, 1)

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def dim(self) -> int:
        return self.spec.dim

    def embed(self, frames: np.ndarray) -> np.ndarray:
        """(16, 224, 224, 3) uint8 RGB -> (dim,) float32 embedding."""
        x = torch.from_numpy(np.ascontiguousarray(frames)).float() / 255.0
        x = x.permute(3, 0, 1, 2).unsqueeze(0)  # -> (1, C, T, H, W)
        x = (x - self._mean) / self._std
        with torch.no_grad():
            out = self._module(x.to(self.device))
        vec = out.detach().cpu().numpy().reshape(-1).astype(np.float32)
        if vec.shape != (self.spec.dim,):
            raise ExtractorError(
                f"backbone {self.spec.name!r} produced {vec.shape[0]} values, "
                f"expected {self.spec.dim}"
            )
        if not np.all(np.isfinite(vec)):
            raise ExtractorError(f"backbone {self.spec.name!r} produced non-finite values")
        return vec


def weights_path(name: str, weights_dir) -> Path:
    return Path(weights_dir) / f"{name}.pt"


def load_backbone(name: str, weights_dir, device: str = "cpu") -> TorchScriptBackbone:
    if name not in BACKBONES:
        raise ExtractorError(f"unknown backbone {name!r}; choose from {sorted(BACKBONES)}")
    spec = BACKBONES[name]
    path = weights_path(name, weights_dir)
    if not path.exists():
        raise WeightsNotFoundError(
            f"no weights for {name!r} at {path}.\n"
            f"Fetch the published checkpoint ({spec.source}), then export it once:\n"
            f"    module = torch.jit.trace(model.eval(), torch.zeros(1, 3, 16, 224, 224))\n"
            f"    module.save({str(path)!r})\n"
            f"The export must map (1, 3, 16, 224, 224) float32 to {spec.dim} values."
        )
    try:
        module = torch.jit.load(str(path), map_location=device)
    except Exception as exc:
        raise ExtractorError(f"{path}: not a loadable TorchScript module: {exc}") from exc
    backbone = TorchScriptBackbone(spec, module, device=device)
    # fail fast on dimension mismatches before touching real clips
    probe = np.zeros((16, 224, 224, 3), dtype=np.uint8)
    backbone.embed(probe)
    return backbone
