"""Deterministic named random substreams.

Every random choice in the package flows from one master seed through
substreams named by (seed, purpose, index...) keys, so partial pipelines
and parallel schedules reproduce bit-for-bit.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_int(key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    return abs(int(key))


def seed_sequence(*keys) -> np.random.SeedSequence:
    """SeedSequence from a tuple of int/str keys. Strings hash via crc32."""
    if not keys:
        raise ValueError("at least one seed key is required")
    return np.random.SeedSequence([_key_int(k) for k in keys])


def substream(*keys) -> np.random.Generator:
    """Generator for the substream named by keys."""
    return np.random.default_rng(seed_sequence(*keys))


def derive_seed(*keys) -> int:
    """Stable integer seed for handing a whole sub-pipeline its own root."""
    return int(seed_sequence(*keys).generate_state(1, np.uint64)[0])
