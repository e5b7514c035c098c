"""Counter-based SplitMix64 random stream keyed on (seed, step, utterance id).

The derivation is fixed so any implementation can reproduce the draws
bit-exactly::

    key   = seed ^ step ^ fnv1a_64(utf8(utterance_id))      (all mod 2**64)
    state = splitmix64_mix(key)
    next  : state += 0x9E3779B97F4A7C15; output splitmix64_mix(state)

Uniform floats take the top 53 bits of an output: ``(x >> 11) * 2**-53``.
"""

from __future__ import annotations

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def splitmix64_mix(z: int) -> int:
    """SplitMix64 output finalizer (Stafford variant 13)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


def mix_key(seed: int, step: int, utterance_id: str | None) -> int:
    """Stream key for one draw context.  ``utterance_id=None`` drops the id term."""
    key = (seed & MASK64) ^ (step & MASK64)
    if utterance_id is not None:
        key ^= fnv1a_64(utterance_id.encode("utf-8"))
    return splitmix64_mix(key)


class SplitMix64:
    """Caller-owned SplitMix64 stream."""

    def __init__(self, state: int) -> None:
        self.state = state & MASK64

    @classmethod
    def for_context(cls, seed: int, step: int, utterance_id: str | None) -> "SplitMix64":
        return cls(mix_key(seed, step, utterance_id))

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return splitmix64_mix(self.state)

    def next_float(self) -> float:
        """Uniform float in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))
