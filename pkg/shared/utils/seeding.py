"""
Deterministic random-stream derivation.
"""

from typing import List, Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence]


def seed_sequence(seed: SeedLike, *path: int) -> np.random.SeedSequence:
    """Seed sequence for a (seed, path...) key.

    The same key always yields the same stream no matter which other
    streams were drawn before it.
    """
    if isinstance(seed, np.random.SeedSequence):
        if not path:
            return seed
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(path))
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in path))


def make_rng(seed: SeedLike, *path: int) -> np.random.Generator:
    """Generator for a (seed, path...) key."""
    return np.random.default_rng(seed_sequence(seed, *path))


def spawn_rngs(seed: SeedLike, count: int) -> List[np.random.Generator]:
    """`count` independent generators, the i-th one keyed by (seed, i)."""
    return [make_rng(seed, i) for i in range(count)]


def derive_seed(rng: np.random.Generator) -> int:
    """Draw a 32-bit integer seed for libraries that take plain ints."""
    return int(rng.integers(0, 2**32 - 1))

