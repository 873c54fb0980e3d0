"""Seeded, splittable random bits.

Streams come from Philox4x64-10 (numpy's ``Philox`` bit generator).  A stream
is addressed by ``(seed, stream)``: the 128-bit Philox key is
``seed | stream << 64``.  Blocks are generated at counter values 1, 2, 3, ...
(numpy increments before generating), each block yields four 64-bit words,
and words are consumed in order.  Bits are taken least-significant first from each
word.  Uniform integers below ``m`` use rejection on whole words
(reject ``w >= 2**64 - 2**64 % m``, return ``w % m``).

Restarts and sub-experiments get their own stream index, so no stream is
ever reused for a different purpose.
"""

from __future__ import annotations

import numpy as np

_M64 = (1 << 64) - 1


class BitStream:
    def __init__(self, seed: int, stream: int = 0):
        if seed < 0 or seed > _M64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if stream < 0 or stream > _M64:
            raise ValueError("stream index must fit in 64 unsigned bits")
        self.seed = seed
        self.stream = stream
        self._gen = np.random.Philox(key=seed | stream << 64)

    def split(self, stream: int) -> BitStream:
        return BitStream(self.seed, stream)

    def words(self, count: int) -> np.ndarray:
        return self._gen.random_raw(count).astype(np.uint64)

    def bits(self, count: int) -> np.ndarray:
        """``count`` fair bits as a uint8 array."""
        if count <= 0:
            return np.zeros(0, dtype=np.uint8)
        w = self.words(-(-count // 64))
        as_bytes = w.astype("<u8").view(np.uint8)
        return np.unpackbits(as_bytes, bitorder="little")[:count]

    def below(self, m: int) -> int:
        if m <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - (1 << 64) % m
        while True:
            w = int(self._gen.random_raw())
            if w < limit:
                return w % m

    def sample(self, population: int, k: int) -> list[int]:
        """Uniform k-subset of ``range(population)`` (partial Fisher-Yates), sorted."""
        pool = list(range(population))
        for j in range(k):
            r = j + self.below(population - j)
            pool[j], pool[r] = pool[r], pool[j]
        return sorted(pool[:k])
