"""Seeded randomness.

All stochastic code draws from numpy's PCG64 bit generator seeded through
``SeedSequence``. Per-item streams come from ``SeedSequence(seed,
spawn_key=(index,))`` so work can be split across items without changing
results. Gaussian variates use ``Generator.standard_normal`` (ziggurat), which
is platform independent for a given numpy release series.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

ALGORITHM = "numpy.PCG64/SeedSequence"


def fresh_seed() -> int:
    return secrets.randbits(63)


@dataclass
class RandomSource:
    seed: int
    spawn_key: tuple = ()
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    algorithm = ALGORITHM

    def __post_init__(self):
        self.seed = int(self.seed)
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(self.spawn_key))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> "RandomSource":
        """Independent stream for item ``index``, derived only from the seed and path."""
        return RandomSource(self.seed, tuple(self.spawn_key) + (int(index),))

    # thin pass-throughs used by the mechanisms
    def uniform(self, size=None) -> np.ndarray:
        return self.generator.random(size)

    def normal(self, sigma: float, size=None) -> np.ndarray:
        return sigma * self.generator.standard_normal(size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def choice(self, n: int, size: int) -> np.ndarray:
        return self.generator.choice(n, size=size, replace=False)


def as_source(rng: Optional[object]) -> RandomSource:
    if isinstance(rng, RandomSource):
        return rng
    if rng is None:
        return RandomSource(fresh_seed())
    return RandomSource(int(rng))
