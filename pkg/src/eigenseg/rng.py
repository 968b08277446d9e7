"""Deterministic 64-bit linear congruential PRNG.

Every stochastic step in this package (k-means++ seeding, pixel sampling
for the variance-ratio diagnostic) draws from this generator so that runs
are bit-reproducible across platforms and Python/numpy versions.

Recurrence (Knuth's MMIX constants):

    state' = (6364136223846793005 * state + 1442695040888963407) mod 2^64

Doubles are formed from the top 53 bits: (state' >> 11) * 2^-53.
"""

import math

import numpy as np

_MULT = 6364136223846793005
_INC = 1442695040888963407
_MASK = (1 << 64) - 1


class Lcg64:
    """Seeded 64-bit LCG with the handful of draws the package needs."""

    def __init__(self, seed: int):
        # Mix the seed once so that small consecutive seeds do not start
        # from nearly identical states.
        self.state = ((seed & _MASK) * _MULT + _INC) & _MASK

    def next_u64(self) -> int:
        self.state = (self.state * _MULT + _INC) & _MASK
        return self.state

    def random(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        return int(self.random() * n)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample_indices(self, n: int, k: int) -> list[int]:
        """k distinct indices from range(n), order fixed by the stream."""
        idx = list(range(n))
        self.shuffle(idx)
        return idx[:k]

    def uniforms(self, count: int):
        """Array of `count` uniform doubles in [0, 1), drawn in order."""
        return np.array([self.random() for _ in range(count)], dtype=np.float64)

    def normal(self) -> float:
        """Standard normal via Box-Muller; consumes two uniforms."""
        u1 = self.random()
        while u1 <= 0.0:
            u1 = self.random()
        u2 = self.random()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def normals(self, count: int):
        """Array of `count` standard normals, drawn in order."""
        return np.array([self.normal() for _ in range(count)], dtype=np.float64)
