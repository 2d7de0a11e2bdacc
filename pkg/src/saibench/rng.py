"""Seed handling.

Slicing draws use SplitMix64, a 64-bit counter-based generator whose
output depends only on integer arithmetic, so the same seed selects the
same samples on every platform and in every language that ports the
dozen lines below. Continuous noise in the synthetic generators uses
numpy's PCG64 seeded from a derived SplitMix64 value.
"""

from __future__ import annotations

from typing import Iterable, Sequence, TypeVar

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

T = TypeVar("T")


def mix64(z: int) -> int:
    """SplitMix64 finalizer (Stafford variant 13)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *parts: int) -> int:
    """Hash a base seed and a path of integers into an independent stream seed.

    ``derive_seed(plan_seed, cell_index)`` is how sweep cells get their
    seeds, so adding cells never perturbs existing ones.
    """
    h = mix64(seed & MASK64)
    for part in parts:
        h = mix64((h ^ (part & MASK64)) + GOLDEN_GAMMA)
    return h


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return mix64(self.state)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection (no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        threshold = ((1 << 64) - n) % n
        while True:
            r = self.next_u64()
            if r >= threshold:
                return r % n

    def sample(self, population: Sequence[T], k: int) -> list[T]:
        """k distinct items drawn uniformly, via a partial Fisher-Yates shuffle."""
        n = len(population)
        if k > n:
            raise ValueError(f"cannot draw {k} items from a population of {n}")
        pool = list(population)
        for i in range(k):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]


def numpy_rng(seed: int, *parts: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *parts)))


def unique_sorted(ids: Iterable[int]) -> list[int]:
    return sorted(set(int(i) for i in ids))
