"""Grouping of enumerated states by their values on a vertex subset.

Every conditional expectation in the package reduces to averaging over the
fibres ``{sigma : sigma_S = s}``.  A :class:`Fibers` object does that for a
whole batch of functions at once with one sparse mat-vec.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.sparse as sp


def projection_codes(states: np.ndarray, vertices: Sequence[int], q: int) -> np.ndarray:
    """Integer code of each state's restriction to ``vertices`` (in given order)."""
    vs = list(vertices)
    if not vs:
        return np.zeros(len(states), dtype=np.int64)
    sub = states[:, vs].astype(np.int64)
    powers = q ** np.arange(len(vs) - 1, -1, -1, dtype=np.int64)
    return sub @ powers


class Fibers:
    """Partition of ``N`` states into groups, with weighted averaging.

    Args:
        labels: group label per state (any integers).
        p: state probabilities used for averaging.
    """

    def __init__(self, labels: np.ndarray, p: np.ndarray):
        uniq, inv, counts = np.unique(labels, return_inverse=True, return_counts=True)
        self.labels = uniq
        self.inverse = inv.astype(np.intp)
        self.counts = counts
        self.G = len(uniq)
        self.N = len(inv)
        self.p = np.asarray(p, dtype=float)
        self.S = sp.csr_matrix((np.ones(self.N), (self.inverse, np.arange(self.N))), shape=(self.G, self.N))
        self.mass = self.S @ self.p

    @classmethod
    def by_vertices(cls, states: np.ndarray, vertices: Sequence[int], q: int, p: np.ndarray) -> "Fibers":
        return cls(projection_codes(states, vertices, q), p)

    def sums(self, f: np.ndarray) -> np.ndarray:
        """Per-group sums of ``p * f``; ``f`` is ``(N,)`` or ``(N, K)``."""
        f = np.asarray(f, dtype=float)
        w = self.p * f if f.ndim == 1 else self.p[:, None] * f
        return self.S @ w

    def means(self, f: np.ndarray) -> np.ndarray:
        """Per-group conditional expectations (groups of zero mass give 0)."""
        s = self.sums(f)
        m = np.where(self.mass > 0, self.mass, 1.0)
        return s / m if s.ndim == 1 else s / m[:, None]

    def lift(self, g: np.ndarray) -> np.ndarray:
        """Broadcast per-group values back to states."""
        return g[self.inverse]

    def expect(self, f: np.ndarray) -> np.ndarray:
        """State-indexed conditional expectation of ``f`` given the group."""
        return self.lift(self.means(f))

    def members(self) -> list[np.ndarray]:
        """State indices of each group, in label order."""
        order = np.argsort(self.inverse, kind="stable")
        return np.split(order, np.cumsum(self.counts)[:-1])
