"""Shared fixture helpers: synthetic clips and traced stand-in backbones."""

import cv2
import numpy as np
import torch


class PooledLinear(torch.nn.Module):
    """Toy stand-in with the real I/O contract: (1,3,16,224,224) -> (1, dim)."""

    def __init__(self, dim):
        super().__init__()
        torch.manual_seed(dim)
        self.lin = torch.nn.Linear(3 * 16, dim)

    def forward(self, x):
        pooled = x.mean(dim=(3, 4)).flatten(1)  # (1, 3*16)
        return self.lin(pooled)


def export_toy_backbone(path, dim):
    module = torch.jit.trace(PooledLinear(dim).eval(), torch.zeros(1, 3, 16, 224, 224))
    module.save(str(path))


def write_clip(path, seconds=60, fps=30, size=(64, 48), grayscale_look=False):
    fourcc = cv2.VideoWriter_fourcc(*("mp4v" if path.suffix == ".mp4" else "MJPG"))
    writer = cv2.VideoWriter(str(path), fourcc, float(fps), size)
    assert writer.isOpened(), f"cannot open video writer for {path}"
    rng = np.random.default_rng(0)
    for i in range(seconds * fps):
        if grayscale_look:
            level = np.full((size[1], size[0]), i % 256, dtype=np.uint8)
            frame = np.stack([level] * 3, axis=-1)
        else:
            frame = rng.integers(0, 256, size=(size[1], size[0], 3), dtype=np.uint8)
        writer.write(frame)
    writer.release()
    return path
