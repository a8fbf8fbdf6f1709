"""Frame sampling and preprocessing.

The schedule is deterministic: window w of a clip with F frames per window
spans clip frames [w*F, (w+1)*F), and the 16 sampled positions inside it are
floor(k * F / 16) for k = 0..15 ("regular intervals"). For a 30-frame window
that is [0, 1, 3, 5, 7, 9, 11, 13, 15, 16, 18, 20, 22, 24, 26, 28].
"""

from __future__ import annotations

import numpy as np

try:
    import cv2
except ImportError:  # pragma: no cover - cv2 is a hard dependency in practice
    cv2 = None

from .config import ExtractionConfig, ExtractorError


def frame_schedule(frames_in_window: int, frames_out: int = 16) -> list[int]:
    """Evenly spaced indices: floor(k * F / frames_out), k = 0..frames_out-1."""
    if frames_in_window < 1:
        raise ExtractorError("window must contain at least one frame")
    return [k * frames_in_window // frames_out for k in range(frames_out)]


def to_rgb(frame: np.ndarray) -> np.ndarray:
    """Grayscale frames are channel-replicated; BGR (cv2's layout) flips to RGB."""
    if frame.ndim == 2:
        return np.stack([frame] * 3, axis=-1)
    if frame.shape[-1] == 1:
        return np.repeat(frame, 3, axis=-1)
    return frame[..., ::-1]  # BGR -> RGB


def sample_frames(window_frames: np.ndarray, config: ExtractionConfig) -> np.ndarray:
    """16 resized RGB frames from one window's raw frames.

    ``window_frames``: (F, H, W, 3) or (F, H, W) uint8 in cv2's BGR layout.
    Returns (16, frame_size, frame_size, 3) uint8 RGB.
    """
    if cv2 is None:
        raise ExtractorError("opencv is required for frame preprocessing")
    size = config.frame_size
    picked = frame_schedule(len(window_frames), config.frames_per_window)
    out = np.empty((config.frames_per_window, size, size, 3), dtype=np.uint8)
    for i, idx in enumerate(picked):
        rgb = to_rgb(np.asarray(window_frames[idx]))
        out[i] = cv2.resize(rgb, (size, size), interpolation=cv2.INTER_AREA)
    return out


def iter_windows(video_path, config: ExtractionConfig):
    """Yield (window_index, frames) for every complete window of a clip.

    Frames are read sequentially; the trailing partial window (beyond
    floor(duration / window_s)) is dropped. Raises ExtractorError for
    undecodable files.
    """
    if cv2 is None:
        raise ExtractorError("opencv is required for video decoding")
    cap = cv2.VideoCapture(str(video_path))
    if not cap.isOpened():
        raise ExtractorError(f"cannot decode {video_path}")
    fps = cap.get(cv2.CAP_PROP_FPS)
    if not fps or fps <= 0:
        cap.release()
        raise ExtractorError(f"{video_path}: no frame rate reported")
    per_window = int(round(fps * config.window_s))
    if per_window < 1:
        cap.release()
        raise ExtractorError(f"{video_path}: window shorter than one frame at {fps} fps")
    buffer: list[np.ndarray] = []
    window_index = 0
    try:
        while True:
            ok, frame = cap.read()
            if not ok:
                break
            buffer.append(frame)
            if len(buffer) == per_window:
                yield window_index, np.stack(buffer)
                buffer.clear()
                window_index += 1
    finally:
        cap.release()
