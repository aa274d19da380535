"""Stable sub-seed derivation.

Sub-seeds come from hashing the parent seed with string keys, so they do not
depend on iteration or scheduling order (and not on PYTHONHASHSEED).
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, *keys) -> int:
    """Return a 64-bit seed determined by ``seed`` and ``keys``."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    for key in keys:
        h.update(b"\x1f")
        h.update(str(key).encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


def rng_for(seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys))
