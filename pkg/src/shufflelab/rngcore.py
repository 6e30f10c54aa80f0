"""Deterministic, platform-independent random numbers.

The generator is SplitMix64 used in counter mode: the k-th output (k = 1, 2, ...)
of a generator with origin seed ``s`` is ``mix64(s + k * GOLDEN)`` where all
arithmetic is modulo 2**64. Because every output is a pure function of
``(s, k)`` the stream can be produced in vectorised blocks with numpy and is
bit-identical on every platform.

Bounded integers use Lemire's multiply-shift on the high 32 bits of an output
with exact rejection, so they are unbiased. Gaussians use Box-Muller on two
53-bit uniforms in (0, 1].

These constants are fixed. Changing any of them changes every recorded
experiment.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_U64 = np.uint64


def mix64(z: int) -> int:
    """SplitMix64 finaliser on a Python int (avalanche over all 64 bits)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    # uint64 array arithmetic wraps modulo 2**64
    z = (z ^ (z >> _U64(30))) * _U64(_M1)
    z = (z ^ (z >> _U64(27))) * _U64(_M2)
    return z ^ (z >> _U64(31))


def combine_seeds(*parts: int) -> int:
    """Fold several integers into one 64-bit seed, order-sensitively."""
    h = 0x243F6A8885A308D3
    for p in parts:
        h = mix64(h ^ mix64((int(p) & MASK64) + GOLDEN))
    return h


class SeededGenerator:
    """Single-owner stream of 64-bit words derived from ``origin_seed``."""

    def __init__(self, seed: int):
        self.origin_seed = int(seed) & MASK64
        self.counter = 0

    def __repr__(self) -> str:
        return f"SeededGenerator(origin_seed={self.origin_seed:#018x}, counter={self.counter})"

    def next_uint64(self) -> int:
        self.counter += 1
        return mix64(self.origin_seed + self.counter * GOLDEN)

    def uint64_array(self, count: int) -> np.ndarray:
        """The next ``count`` words as a uint64 array; advances the counter."""
        if count < 0:
            raise ValueError("count must be non-negative")
        k = np.arange(self.counter + 1, self.counter + count + 1, dtype=np.uint64)
        self.counter += count
        return _mix64_array(_U64(self.origin_seed) + k * _U64(GOLDEN))

    def next_uint_below(self, bound: int) -> int:
        """Uniform integer in ``[0, bound)``."""
        if bound < 1:
            raise ValueError(f"bound must be >= 1, got {bound}")
        if bound > 1 << 32:
            # rare path: plain 64-bit rejection sampling
            limit = (1 << 64) - ((1 << 64) % bound)
            while True:
                x = self.next_uint64()
                if x < limit:
                    return x % bound
        threshold = ((1 << 32) - bound) % bound
        while True:
            prod = (self.next_uint64() >> 32) * bound
            if (prod & 0xFFFFFFFF) >= threshold:
                return prod >> 32

    def uints_below(self, bounds) -> np.ndarray:
        """One uniform draw per entry of ``bounds`` (each in ``[1, 2**32]``).

        Produces exactly the values successive ``next_uint_below`` calls would.
        """
        bounds = np.asarray(bounds, dtype=np.uint64)
        if bounds.size == 0:
            return np.zeros(0, dtype=np.int64)
        if bounds.min() < 1 or bounds.max() > (1 << 32):
            raise ValueError("bounds must lie in [1, 2**32]")
        start = self.counter
        words = self.uint64_array(bounds.size)
        prod = (words >> _U64(32)) * bounds
        low = prod & _U64(0xFFFFFFFF)
        threshold = (_U64(1 << 32) - bounds) % bounds
        rejected = np.flatnonzero(low < threshold)
        if rejected.size == 0:
            return (prod >> _U64(32)).astype(np.int64)
        # replay sequentially from the first rejection so the stream matches the scalar path
        j = int(rejected[0])
        out = (prod[:j] >> _U64(32)).astype(np.int64).tolist()
        self.counter = start + j
        out.extend(self.next_uint_below(int(b)) for b in bounds[j:])
        return np.asarray(out, dtype=np.int64)

    def uniforms(self, count: int) -> np.ndarray:
        """Uniform doubles in (0, 1], 53 bits each."""
        words = self.uint64_array(count)
        return ((words >> _U64(11)).astype(np.float64) + 1.0) * 2.0**-53

    def next_gaussian(self) -> float:
        u1, u2 = self.uniforms(2)
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def gaussians(self, count: int) -> np.ndarray:
        """``count`` standard normals; element i consumes words 2i+1 and 2i+2."""
        u = self.uniforms(2 * count)
        u1, u2 = u[0::2], u[1::2]
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def spawn(self, *tags: int) -> "SeededGenerator":
        """Independent child generator keyed by ``tags``; does not advance self."""
        return SeededGenerator(combine_seeds(self.origin_seed, *tags))
