"""Counter-based random streams keyed by (master seed, tags..., replica).

Every replica draws from its own Philox stream, so results do not depend on
how replicas are scheduled across workers.
"""
from __future__ import annotations

import zlib

import numpy as np


def tag(name: str) -> int:
    """Stable 32-bit integer for a textual stream label."""
    return zlib.crc32(name.encode("utf-8"))


def stream(master_seed: int, *key: int) -> np.random.Generator:
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def replica_streams(master_seed: int, n: int, *key: int):
    for i in range(n):
        yield stream(master_seed, *key, i)
