"""Seeded, splittable random streams.

All randomness in the pipeline flows through Philox, a 64-bit counter-based
generator: the same seed reproduces the same stream bit-for-bit on any
platform, and independent substreams are obtained by mixing a key path
(e.g. sample index, detector element) into the second Philox key word.
"""

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= _MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def _splitmix64(h: int) -> int:
    # Finalizer of the splitmix64 generator; bijective on 64-bit words.
    h = (h + 0x9E3779B97F4A7C15) & _MASK64
    h = ((h ^ (h >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    h = ((h ^ (h >> 27)) * 0x94D049BB133111EB) & _MASK64
    return h ^ (h >> 31)


def substream_key(*path: int) -> int:
    """Fold a sequence of non-negative integers into one 64-bit word."""
    h = 0
    for p in path:
        if p < 0:
            raise ValueError(f"substream path entries must be >= 0, got {p}")
        h = _splitmix64((h ^ int(p)) & _MASK64)
    return h


def stream(seed, *path: int) -> np.random.Generator:
    """Generator for the substream identified by ``(seed, *path)``.

    Streams with distinct paths use distinct Philox keys and are
    statistically independent; the same ``(seed, path)`` always yields
    the identical draw sequence.
    """
    seed = check_seed(seed)
    key = np.array([seed, substream_key(*path)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
