"""Deterministic RNG construction from structured integer keys."""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def seeded_rng(*parts: int) -> np.random.Generator:
    """Generator keyed by a tuple of integers; the same key always yields the
    same stream, independent of call order elsewhere."""
    return np.random.default_rng([int(p) & _MASK64 for p in parts])
