"""Deterministic random streams keyed by (master seed, key path).

Every worker gets its own ``numpy.random.Generator`` derived from the master
seed and a tuple of keys, so results do not depend on the order in which
workers run.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["stream", "stream_key", "derive_seed"]


def stream_key(key: int | str) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf8"))
    if key < 0:
        raise ValueError(f"stream keys must be non-negative, got {key}")
    return int(key)


def stream(seed: int, *keys: int | str) -> np.random.Generator:
    """Return the generator for sub-stream ``keys`` of master ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(stream_key(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *keys: int | str) -> int:
    """Integer seed for sub-stream ``keys``, for APIs that take a seed rather than a generator."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(stream_key(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
