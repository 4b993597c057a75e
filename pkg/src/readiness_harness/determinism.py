"""Seeded primitives shared by sampling, simulation and synthetic generation.

Everything here is platform-independent: no reliance on ``random`` or on
Python's salted ``hash()``.
"""

from __future__ import annotations

from typing import Hashable, Iterator, Mapping, MutableSequence, Sequence, TypeVar

T = TypeVar("T")

_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: str | bytes) -> int:
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


class SplitMix64:
    """splitmix64 stream (Steele, Lea & Flood)."""

    def __init__(self, seed: int) -> None:
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound) by rejection, no modulo bias."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % bound

    def uniform(self) -> float:
        """Float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) / float(1 << 53)

    def __iter__(self) -> Iterator[int]:
        while True:
            yield self.next_u64()


def salted_seed(seed: int, *salt: object) -> int:
    """Derive an independent stream seed from a base seed and salt values."""
    key = "|".join(str(s) for s in salt)
    return (seed * 0x9E3779B97F4A7C15 ^ fnv1a64(key)) & _MASK64


def fisher_yates(items: MutableSequence[T], rng: SplitMix64) -> MutableSequence[T]:
    """In-place Fisher-Yates shuffle driven by ``rng``; returns ``items``."""
    for i in range(len(items) - 1, 0, -1):
        j = rng.below(i + 1)
        items[i], items[j] = items[j], items[i]
    return items


def largest_remainder(total: int, shares: Mapping[Hashable, float]) -> dict:
    """Split ``total`` into integer counts proportional to ``shares``.

    Floors are assigned first; leftover units go to the largest fractional
    remainders, ties resolved by the mapping's iteration order.
    """
    if total < 0:
        raise ValueError("total must be non-negative")
    weight_sum = sum(shares.values())
    if weight_sum <= 0:
        raise ValueError("shares must have positive mass")
    keys: Sequence[Hashable] = list(shares)
    exact = {k: total * shares[k] / weight_sum for k in keys}
    counts = {k: int(exact[k] + 1e-9) for k in keys}
    leftover = total - sum(counts.values())
    order = sorted(
        range(len(keys)),
        key=lambda i: (-(exact[keys[i]] - counts[keys[i]]), i),
    )
    for i in order[:leftover]:
        counts[keys[i]] += 1
    return counts
