"""Seeded random streams.

Every random draw goes through :func:`stream`, which builds a Philox
(counter-based) generator from a ``SeedSequence`` keyed on
``(seed, n, purpose)``. Each pipeline stage asks for its own purpose tag,
so adding a stage never shifts the draws of an earlier one.
"""
from __future__ import annotations

import zlib

import numpy as np

PURPOSES = ("positions", "levels", "workload", "caps", "sampling", "resample")


def _purpose_key(purpose: str) -> int:
    # crc32 is stable across processes, unlike hash()
    return zlib.crc32(purpose.encode("utf-8"))


def stream(seed: int, n: int = 0, purpose: str = "default") -> np.random.Generator:
    """Independent generator for one ``(seed, n, purpose)`` tuple."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence([int(seed), int(n), _purpose_key(purpose)])
    return np.random.Generator(np.random.Philox(ss))


def as_generator(seed) -> np.random.Generator:
    """Accept an int seed or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return stream(int(seed))
