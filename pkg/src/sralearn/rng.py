"""Deterministic random streams derived from a single master seed.

Every source of randomness in the package (init, shuffling, dropout,
synthetic sampling) pulls from a named substream so that runs are
reproducible and independent workers never share a stream.
"""

from __future__ import annotations

import hashlib

import numpy as np


def substream(seed: int, label: str) -> np.random.Generator:
    """Return a generator keyed by (seed, label).

    The label is hashed so unrelated components cannot collide by
    accident; the same (seed, label) pair always yields the same stream.
    """
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    key = int.from_bytes(digest[:8], "big")
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, key]))


def substream_seed(seed: int, label: str) -> int:
    """Derive a child integer seed, for handing to a worker process."""
    return int(substream(seed, label).integers(0, 2**63 - 1))
