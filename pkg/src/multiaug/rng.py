"""Deterministic pseudo-random number generation.

Every stochastic choice in the library (augmentation sampling, crop
geometry, dataset synthesis, parameter init, shuffling) flows through
:class:`Rng`, a SplitMix64 generator. SplitMix64 is trivially portable and
bit-exact across platforms, which is what makes end-to-end runs
reproducible byte for byte.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

__all__ = ["Rng", "derive_seed"]


def _finalize(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class Rng:
    """SplitMix64 stream. Single-owner mutable state; never share across workers.

    Parallel pipelines get independent streams via :func:`derive_seed`.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        return _finalize(self.state)

    def next_f64(self) -> float:
        # 53 top bits -> [0, 1)
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, lo: float, hi: float) -> float:
        if lo > hi:
            raise ValueError(f"uniform bounds reversed: lo={lo} > hi={hi}")
        return lo + self.next_f64() * (hi - lo)

    def range(self, n: int) -> int:
        """Uniform integer in [0, n), modulo bias removed by rejection."""
        if n < 1:
            raise ValueError(f"range size must be >= 1, got {n}")
        limit = ((1 << 64) // n) * n
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def next_u64_array(self, n: int) -> np.ndarray:
        """Vectorized batch of ``n`` draws, identical to ``n`` calls of next_u64.

        SplitMix64 is counter-based: the i-th state ahead is
        state + i * GOLDEN mod 2^64, finalized independently.
        """
        steps = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(self.state) + steps * np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        out = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * _GOLDEN) & _MASK64
        return out

    def uniform_array(self, lo: float, hi: float, n: int) -> np.ndarray:
        if lo > hi:
            raise ValueError(f"uniform bounds reversed: lo={lo} > hi={hi}")
        f = (self.next_u64_array(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return lo + f * (hi - lo)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates using this stream."""
        for i in range(len(items) - 1, 0, -1):
            j = self.range(i + 1)
            items[i], items[j] = items[j], items[i]


def derive_seed(root: int, stream_id: int) -> int:
    """Independent deterministic sub-stream seed for worker/epoch/image splits."""
    mixed = (root ^ ((stream_id * _GOLDEN) & _MASK64)) & _MASK64
    return Rng(mixed).next_u64()
