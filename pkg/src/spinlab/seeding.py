"""Reproducible random streams split by a path of labels.

A stream is identified by ``(root_seed, label_1, label_2, ...)``; the path
is hashed into a Philox key, so streams for different experiments, chains
or replicas never overlap and do not depend on creation order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream(root_seed: int, *path) -> np.random.Generator:
    """Counter-based generator keyed by the hash of ``root_seed`` and ``path``."""
    h = hashlib.sha256(repr((int(root_seed),) + tuple(str(p) for p in path)).encode()).digest()
    key = np.frombuffer(h[:16], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
