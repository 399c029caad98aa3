"""Deterministic, addressable random streams for parallel simulation.

Every stochastic task owns a stream keyed by (seed, *components), so results
never depend on scheduling order or thread count. Streams are backed by the
counter-based Philox generator, keyed with a SplitMix64 fold of the
components; distinct keys give statistically independent streams.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def mix64(z: int) -> int:
    """SplitMix64 finalizer: bijective 64-bit avalanche mix."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _fold(acc: int, value: int) -> int:
    return mix64(acc ^ mix64(value & _MASK64))


def derive_key(seed: int, *components: int | str) -> tuple[int, int]:
    """Fold seed and components into a 128-bit Philox key, order-sensitive."""
    acc = mix64(seed & _MASK64)
    for part in components:
        if isinstance(part, str):
            data = part.encode("utf-8")
            acc = _fold(acc, len(data))
            for i in range(0, len(data), 8):
                acc = _fold(acc, int.from_bytes(data[i : i + 8], "little"))
        else:
            acc = _fold(acc, int(part))
    return acc, mix64(acc)


def stream(seed: int, *components: int | str) -> np.random.Generator:
    """Independent generator addressed by (seed, *components)."""
    k0, k1 = derive_key(seed, *components)
    return np.random.Generator(np.random.Philox(key=np.array([k0, k1], dtype=np.uint64)))
