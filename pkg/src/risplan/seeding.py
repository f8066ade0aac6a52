"""Deterministic child-RNG derivation.

All randomness in a run flows from the scene seed. Stochastic sub-steps
(per-pilot surface configs, fading draws, switching chains) derive child
generators from (seed, stream tag, counters...), so grid cells can be
evaluated in any order or across worker processes without changing results.
"""

from __future__ import annotations

import zlib

import numpy as np


def _as_entropy(key):
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFFFFFFFFFF
    raise TypeError(f"rng key must be str or int, got {type(key).__name__}")


def derived_rng(seed, *keys) -> np.random.Generator:
    """Child generator for (seed, *keys); same tuple, same stream, always."""
    entropy = [_as_entropy(seed)] + [_as_entropy(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))
