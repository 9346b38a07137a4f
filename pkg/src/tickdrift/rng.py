"""Seeded, splittable random streams (Philox counter-based generator)."""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent stream for ``seed`` and an optional path of integer keys.

    The same (seed, keys) always yields the same stream on every platform.
    """
    seq = np.random.SeedSequence([int(seed) & (2**64 - 1), *map(int, keys)])
    return np.random.Generator(np.random.Philox(seq))
