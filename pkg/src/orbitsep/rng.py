"""Seed derivation shared by every randomized routine.

All randomness flows from an integer base seed.  Child seeds are derived by
folding keys through splitmix64, so a trial's stream depends only on its
keys and never on how many other trials run or in which worker.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(base: int, *keys: int) -> int:
    """Mix ``base`` with each key in turn; ``derive_seed(s, i)`` is ``splitmix64(s + i)``."""
    h = int(base) & _MASK
    for k in keys:
        h = splitmix64((h + int(k)) & _MASK)
    return h


def make_rng(seed, *keys: int) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        if keys:
            raise TypeError("keys can only be folded into an integer seed")
        return seed
    return np.random.default_rng(derive_seed(seed, *keys) if keys else int(seed) & _MASK)
