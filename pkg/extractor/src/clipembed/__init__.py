"""Turn gameplay clips into per-window embedding tables.

Each clip is split into non-overlapping windows (1 s by default), 16 frames
are sampled per window on the fixed floor(k * F / 16) schedule, resized to
224x224 RGB, and pushed through a frozen pretrained video backbone. Records
land in the little-endian "EMB1" binary table keyed by (game_id, window_index),
ready for the few-shot modelling pipeline.
"""

__version__ = "0.1.0"
