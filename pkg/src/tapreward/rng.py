"""Deterministic seed derivation.

One master seed fans out into independent child streams, addressed by
string paths. A child seed is the first 8 bytes of
SHA-256("{master}/{part}/{part}/...") read big-endian, so any process
that knows the master seed and the path reproduces the stream exactly,
regardless of platform or draw order elsewhere.
"""

from __future__ import annotations

import hashlib
import random

__all__ = ["derive_seed", "rng_for"]

_MAX_SEED = 2**64


def derive_seed(master: int, *path: object) -> int:
    """Derive a 64-bit child seed from a master seed and a path."""
    if not 0 <= master < _MAX_SEED:
        raise ValueError(f"master seed out of range: {master}")
    material = "/".join([str(master), *(str(p) for p in path)])
    raw = hashlib.sha256(material.encode("utf-8")).digest()
    return int.from_bytes(raw[:8], "big")


def rng_for(master: int, *path: object) -> random.Random:
    """Seeded generator for the child stream at the given path."""
    return random.Random(derive_seed(master, *path))
