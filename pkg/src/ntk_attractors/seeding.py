"""Counter-based seed derivation.

A stream is identified by the master seed plus a key of integers and short
labels; labels are mapped to integers with CRC-32 so that streams stay stable
across runs, processes and Python versions.  The key becomes the
``spawn_key`` of a ``numpy.random.SeedSequence``.
"""

from __future__ import annotations

import zlib

import numpy as np


def _word(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    part = int(part)
    if part < 0:
        raise ValueError("seed key parts must be non-negative")
    return part


def seed_sequence(seed: int, *key) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=tuple(_word(p) for p in key))


def derive_rng(seed: int, *key) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, *key))


def derive_seed(seed: int, *key) -> int:
    """A 63-bit integer seed for APIs that want a plain int."""
    return int(seed_sequence(seed, *key).generate_state(2, np.uint64)[0] >> np.uint64(1))
