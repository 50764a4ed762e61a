"""Deterministic, platform-stable seeding helpers.

Every stochastic operation in the package takes an explicit integer seed and
feeds it to ``numpy.random.default_rng`` (PCG64). Sub-seeds (sweep cells,
probe batches) are derived by hashing, not by drawing from a parent stream,
so results do not depend on evaluation order or parallel scheduling.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    """Collapse a tuple of printable parts into a stable 64-bit seed."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng_from(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
