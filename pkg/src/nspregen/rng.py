"""Reproducible random streams.

All randomness in the toolkit flows through `stream`, which derives a
counter-based Philox generator from a 64-bit seed plus a path of
sub-stream labels. Streams with different paths are statistically
independent, and the derivation is stable across platforms and numpy
versions (SeedSequence hashing is specified, Philox is counter-based),
so a manifest's base seed pins every field byte it will ever produce.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["stream", "derive_seed"]


def _key(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if part < 0:
        raise ValueError("stream path parts must be non-negative")
    return int(part)


def stream(seed: int, *path: int | str) -> np.random.Generator:
    """Return the Philox generator for `seed` at sub-stream `path`.

    Equal (seed, path) pairs always yield identical generators; any
    difference in the path yields an independent stream.
    """
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1),
                                spawn_key=tuple(_key(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *path: int | str) -> int:
    """Collapse (seed, path) into a single u64 usable as a child seed."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1),
                                spawn_key=tuple(_key(p) for p in path))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)
