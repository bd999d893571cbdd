"""Seeded pseudo-random stream for reproducible runs.

The generator is splitmix64: 64 bits of state, one additive constant, two
xor-multiply mixes. It is trivial to reimplement bit-for-bit anywhere, which
is what makes trace fingerprints portable; the algorithm name is embedded in
every fingerprint.
"""
from __future__ import annotations

ALGORITHM = "splitmix64"

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """splitmix64 sequence generator over a 64-bit seed."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform draw in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0 ** -53)
