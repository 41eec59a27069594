"""Deterministic random source for simulation runs.

Every stochastic decision in a simulation draws from a single Rng instance
owned by the run, in a documented order (node deployment, then per round:
election draws in node-id order, watchdog dice in node-id order, per-slot
payload noise, attacker draws at their scheduled ticks).  The generator is
SplitMix64: a 64-bit counter advanced by a fixed odd constant and passed
through an avalanche mixer.  It is defined purely over 64-bit integer
arithmetic, so equal seeds produce identical draw sequences on every
platform and Python version.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class Rng:
    """SplitMix64 pseudo-random stream."""

    __slots__ = ("seed", "_state")

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self._state = self.seed

    def next_u64(self) -> int:
        """Next raw 64-bit output."""
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def uniform(self, lo: float, hi: float) -> float:
        """Uniform float in [lo, hi)."""
        return lo + (hi - lo) * self.random()

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n), exact (rejection sampling, no modulo bias)."""
        if n <= 0:
            raise ValueError("randrange() bound must be positive")
        mask = n - 1
        mask |= mask >> 1
        mask |= mask >> 2
        mask |= mask >> 4
        mask |= mask >> 8
        mask |= mask >> 16
        mask |= mask >> 32
        while True:
            v = self.next_u64() & mask
            if v < n:
                return v

    def state(self) -> int:
        """Current internal counter (for diagnostics / replay checks)."""
        return self._state
