"""Deterministic random streams.

Every stream is a numpy ``Generator`` over the counter-based Philox
bit generator.  Replicate ``r`` of an experiment with master seed ``s``
uses the key ``mix64(s, r)``, so replicates are independent of the order
in which they are run.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN64 = 0x9E3779B97F4A7C15

ALGORITHM = "numpy Philox4x64-10; replicate key = splitmix64(master + (r+1)*0x9E3779B97F4A7C15)"


def splitmix64(x: int) -> int:
    """One round of the SplitMix64 finalizer."""
    z = (x + GOLDEN64) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix64(master_seed: int, index: int) -> int:
    """Derive the 64-bit seed of sub-stream ``index``."""
    if master_seed < 0 or index < 0:
        raise ValueError("seeds and indices must be nonnegative")
    return splitmix64((master_seed + (index + 1) * GOLDEN64) & MASK64)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & MASK64))


def replicate_rng(master_seed: int, index: int) -> np.random.Generator:
    return make_rng(mix64(master_seed, index))


def as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return make_rng(int(seed_or_rng))
