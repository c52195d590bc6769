"""Deterministic random streams shared by both simulation backends.

Everything stochastic in this package draws from a splitmix64 stream.  The
compiled kernels re-implement exactly the same integer and floating-point
operations (same op order, libm calls, no FMA contraction), so a given seed
produces bit-identical simulations on either backend and results never depend
on the numpy version or on scheduling.

Seeds for sub-tasks (grid cells, trials, genomes, ...) are derived with
`derive_seed`, which folds the component indices through the splitmix64
finalizer.  Derived seeds are order-sensitive and schedule-independent, which
is what makes parallel runs reproducible.
"""

from __future__ import annotations

import math

MASK64 = (1 << 64) - 1

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_FOLD = 0xFF51AFD7ED558CCD

_U53 = 1.0 / 9007199254740992.0  # 2**-53
_TWO_PI = 6.283185307179586


def mix64(z: int) -> int:
    """splitmix64 finalizer; a 64-bit bijective scrambler."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def derive_seed(*components: int) -> int:
    """Map a tuple of nonnegative integers to a well-mixed 64-bit seed."""
    h = _GOLDEN
    for c in components:
        h = mix64(h ^ ((int(c) & MASK64) * _FOLD & MASK64))
    return h


class Stream:
    """splitmix64 generator state; one instance per independent random task."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = int(seed) & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & MASK64
        return mix64(self._state)

    def uniform(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * _U53

    def uniform_signed(self) -> float:
        """Uniform double in [-1, 1)."""
        return 2.0 * self.uniform() - 1.0

    def normal(self) -> float:
        """Standard normal via Box-Muller (two uniforms per draw)."""
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(_TWO_PI * u2)

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n).  Modulo bias is negligible for n << 2**64."""
        if n <= 0:
            raise ValueError("randrange needs n > 0")
        return self.next_u64() % n

    def choice(self, seq):
        return seq[self.randrange(len(seq))]

    def sign(self) -> float:
        return 1.0 if self.next_u64() & 1 else -1.0
