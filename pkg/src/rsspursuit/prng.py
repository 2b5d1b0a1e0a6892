"""Portable seeded pseudo-random streams.

Everything here is pure 64-bit integer arithmetic, so the same seed yields the
same numbers on every platform and Python build.  Two generators are used:

* ``splitmix64`` (Steele, Lea & Flood) for seeding and for hashing
  coordinates into independent substream keys;
* ``xoshiro256**`` (Blackman & Vigna) as the stream generator.

A substream is addressed by a seed plus a tuple of non-negative integer
coordinates, e.g. ``(block, scale)``.  The key is built by folding the
coordinates one at a time::

    h = seed
    for c in coords:
        h = mix64(h + GOLDEN * (c + 1))

and the xoshiro state is then filled with four successive splitmix64 outputs
started from ``h``.  Because every draw is a pure function of
``(seed, coords)``, callers can evaluate any substream in any order.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """splitmix64 output finalizer (a bijection on 64-bit words)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; returns ``(new_state, output)``."""
    state = (state + GOLDEN) & MASK64
    return state, mix64(state)


def substream_key(seed: int, *coords: int) -> int:
    h = seed & MASK64
    for c in coords:
        if c < 0:
            raise ValueError("substream coordinates must be non-negative")
        h = mix64(h + GOLDEN * (c + 1))
    return h


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256:
    """xoshiro256** 1.0 generator."""

    __slots__ = ("s",)

    def __init__(self, seed: int):
        s = []
        state = seed & MASK64
        for _ in range(4):
            state, out = splitmix64(state)
            s.append(out)
        self.s = s

    @classmethod
    def substream(cls, seed: int, *coords: int) -> "Xoshiro256":
        return cls(substream_key(seed, *coords))

    def next_u64(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def below(self, n: int) -> int:
        """Unbiased integer in ``[0, n)`` (Lemire's multiply-and-reject)."""
        if n <= 0:
            raise ValueError("bound must be positive")
        m = self.next_u64() * n
        low = m & MASK64
        if low < n:
            threshold = (-n) % n
            while low < threshold:
                m = self.next_u64() * n
                low = m & MASK64
        return m >> 64

    def random(self) -> float:
        """Double in ``[0, 1)`` with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


def numpy_rng(seed: int, *coords: int) -> np.random.Generator:
    """Bulk numpy generator keyed by the same substream scheme.

    Used where millions of variates are needed (Monte Carlo); the bit stream
    is PCG64's, so it is reproducible for a given numpy major version.
    """
    return np.random.Generator(np.random.PCG64(substream_key(seed, *coords)))
