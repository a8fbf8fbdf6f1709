"""Deterministic, named random streams.

Every stochastic step in the package draws from a Philox4x32-10 counter-based
bit generator keyed by the SHA-256 digest of the canonical string
``"<seed>:<label>:<index>"`` (first 16 digest bytes, little-endian integer).
Philox and SHA-256 are both exactly specified, so any implementation seeded
the same way reproduces the identical stream. Sampling without replacement is
done with an explicit partial Fisher-Yates shuffle (see :func:`choice_without_
replacement`) instead of ``Generator.choice`` so the draw sequence does not
depend on numpy internals.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_key(seed: int, label: str, index: int = 0) -> int:
    """128-bit Philox key for the stream named by (seed, label, index)."""
    digest = hashlib.sha256(f"{seed}:{label}:{index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


def stream(seed: int, label: str, index: int = 0) -> np.random.Generator:
    """A fresh generator for the named stream; identical inputs, identical stream."""
    return np.random.Generator(np.random.Philox(key=derive_key(seed, label, index)))


def choice_without_replacement(rng: np.random.Generator, pool: np.ndarray, k: int) -> np.ndarray:
    """Draw ``k`` distinct elements of ``pool`` via partial Fisher-Yates.

    Step j swaps position j with position j + floor(u * (n - j)), u a fresh
    double from ``rng.random()``. The first k positions of the shuffled copy
    are returned, in draw order.
    """
    n = len(pool)
    if k > n:
        raise ValueError(f"cannot draw {k} items from a pool of {n}")
    out = np.array(pool, copy=True)
    for j in range(k):
        i = j + int(rng.random() * (n - j))
        out[j], out[i] = out[i], out[j]
    return out[:k]
