"""SplitMix64 pseudo-random generator.

Every random choice in the package is drawn from SplitMix64 (Steele, Lea and
Flood 2014). The generator state is a single 64-bit word advanced by the
golden-ratio increment ``0x9E3779B97F4A7C15``; each output is the state passed
through the finalizer below. Uniform doubles take the top 53 bits of an output
and scale by ``2**-53``. ``splitmix64(x)`` is the first output of a generator
seeded with ``x`` and doubles as the seed-derivation hash, e.g. circuit ``i``
of a corpus uses ``splitmix64(master_seed ^ i)``.

The algorithm is small enough to port bit-for-bit to any language, which is
the point: seeds recorded in a manifest reproduce the same circuits, shots and
splits everywhere.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 1.0 / (1 << 53)


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def splitmix64(x: int) -> int:
    """Hash a 64-bit integer; equal to the first draw of ``SplitMix64(x)``."""
    return _mix((x + GOLDEN) & MASK64)


class SplitMix64:
    """Scalar SplitMix64 stream."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return _mix(self.state)

    def random(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * _INV53

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError("randbelow needs n >= 1")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle (descending index form)."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def splitmix64_array(x) -> np.ndarray:
    """Vectorised :func:`splitmix64` over an integer array."""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix_array(x + np.uint64(GOLDEN))


def u64_streams(seeds, count: int) -> np.ndarray:
    """Raw outputs ``[s, j]`` = draw ``j`` of the stream seeded with ``seeds[s]``."""
    seeds = np.atleast_1d(np.asarray(seeds, dtype=np.uint64))
    steps = np.arange(1, count + 1, dtype=np.uint64) * np.uint64(GOLDEN)
    with np.errstate(over="ignore"):
        return _mix_array(seeds[:, None] + steps[None, :])


def uniform_streams(seeds, count: int) -> np.ndarray:
    """Uniform doubles in [0, 1), one row of ``count`` draws per seed.

    Row ``s`` equals ``[SplitMix64(seeds[s]).random() for _ in range(count)]``.
    """
    raw = u64_streams(seeds, count)
    return (raw >> np.uint64(11)).astype(np.float64) * _INV53


def uniforms(seed: int, count: int) -> np.ndarray:
    return uniform_streams([seed], count)[0]


def permutation(seed: int, n: int) -> np.ndarray:
    """Seeded permutation of ``range(n)``: stable argsort of 64-bit draws."""
    return np.argsort(u64_streams([seed], n)[0], kind="stable")
