"""Seeded, portable random number generation.

Every random decision in the harness (question sampling, option shuffling,
presentation order, noisy-informant flips) flows through :class:`SplitMix64`
so that a batch or run is reproducible bit-for-bit on any platform, Python
version, or reimplementation in another language.  Library generators were
rejected because their streams are only stable within a release series.
"""

from __future__ import annotations

import hashlib

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def derive_seed(seed: int, label: str) -> int:
    """Derive an independent child seed from a parent seed and a label.

    The child seed is the first 8 bytes (big-endian) of
    SHA-256(b"<seed>:<label>").  Labels namespace the harness's independent
    random streams ("select", "order", "opts:ES:A141", ...), so adding a new
    stream never perturbs existing ones.
    """
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class SplitMix64:
    """SplitMix64 generator (Steele, Lea & Flood 2014).

    State update per draw, all arithmetic mod 2**64:

        state += 0x9E3779B97F4A7C15
        z = state
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB
        return z ^ (z >> 31)
    """

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * 2.0**-53

    def randbelow(self, bound: int) -> int:
        """Uniform integer in [0, bound) by unbiased rejection sampling."""
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        # Reject draws from the tail shorter than a full multiple of bound.
        limit = _MASK64 + 1 - ((_MASK64 + 1) % bound)
        while True:
            draw = self.next_u64()
            if draw < limit:
                return draw % bound

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle, iterating from the last element down."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, items, count: int) -> list:
        """Uniform sample of ``count`` items without replacement.

        Partial Fisher-Yates over a copy; the returned order is itself random
        but callers that need a presentation order should shuffle separately
        with a derived stream.
        """
        if count < 0:
            raise ValueError(f"sample size must be non-negative, got {count}")
        pool = list(items)
        if count > len(pool):
            raise ValueError(f"sample size {count} exceeds population size {len(pool)}")
        for i in range(count):
            j = i + self.randbelow(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:count]
