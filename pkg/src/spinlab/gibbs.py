"""Exact Gibbs distributions by brute-force enumeration.

Everything here is an oracle: tables of all feasible states, marginals,
fibre averages, all-pairs influence matrices and their top eigenvalue,
single-site dependency matrices and their Perron root.
"""

from __future__ import annotations

import itertools
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .fibers import Fibers, projection_codes
from .model import (
    EMPTY,
    CapExceeded,
    InfeasibleError,
    Pinning,
    SpinModelError,
    SpinSystem,
    all_configurations,
    encode,
)

DEFAULT_CAP = 1 << 24


def enumerate_states(sys: SpinSystem, tau: Pinning = EMPTY, cap: int = DEFAULT_CAP):
    """Feasible configurations consistent with ``tau`` and their log-weights.

    Returns ``(states, log_w)`` in lexicographic order.
    """
    pins = tau.as_dict()
    for v, a in pins.items():
        if not (0 <= v < sys.n and 0 <= a < sys.q):
            raise SpinModelError(f"pin ({v}, {a}) out of range")
    free = [v for v in range(sys.n) if v not in pins]
    size = sys.q ** len(free)
    if size > cap:
        raise CapExceeded(f"{size} states exceed cap {cap}")
    sub = all_configurations(len(free), sys.q)
    states = np.empty((len(sub), sys.n), dtype=np.int8)
    states[:, free] = sub
    for v, a in pins.items():
        states[:, v] = a
    lw = sys.log_weights(states)
    ok = np.isfinite(lw)
    if not ok.any():
        raise InfeasibleError(f"pinning {tau.to_io()} has empty support")
    return np.ascontiguousarray(states[ok]), lw[ok]


def _normalise(lw: np.ndarray) -> tuple[float, np.ndarray]:
    shift = float(lw.max())
    z = math.fsum(np.exp(lw - shift).tolist())
    log_z = shift + math.log(z)
    return log_z, np.exp(lw - log_z)


@dataclass(frozen=True, eq=False)
class GibbsTable:
    """Exact conditional Gibbs measure ``mu^tau`` on its support."""

    system: SpinSystem
    pinning: Pinning
    states: np.ndarray
    log_weights: np.ndarray
    log_partition: float = field(init=False)
    probs: np.ndarray = field(init=False)

    def __post_init__(self):
        log_z, p = _normalise(self.log_weights)
        object.__setattr__(self, "log_partition", log_z)
        object.__setattr__(self, "probs", p)
        for arr in (self.states, self.log_weights, self.probs):
            arr.setflags(write=False)

    @property
    def N(self) -> int:
        return len(self.states)

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def q(self) -> int:
        return self.system.q

    @cached_property
    def free(self) -> tuple[int, ...]:
        pinned = set(self.pinning.vertices)
        return tuple(v for v in range(self.n) if v not in pinned)

    @cached_property
    def codes(self) -> np.ndarray:
        return encode(self.states, self.q)

    @cached_property
    def marginals(self) -> np.ndarray:
        """``(n, q)`` array of single-site marginals."""
        out = np.zeros((self.n, self.q))
        for v in range(self.n):
            out[v] = np.bincount(self.states[:, v], weights=self.probs, minlength=self.q)
        return out

    def index_of(self, states: np.ndarray) -> np.ndarray:
        """Row indices of the given configurations (``-1`` if absent)."""
        S = np.atleast_2d(states)
        valid = ((S >= 0) & (S < self.q)).all(axis=1)
        c = encode(np.where(valid[:, None], S, 0), self.q)
        pos = np.searchsorted(self.codes, c)
        pos = np.minimum(pos, self.N - 1)
        return np.where(valid & (self.codes[pos] == c), pos, -1)

    def expect(self, f: np.ndarray) -> np.ndarray | float:
        return self.probs @ np.asarray(f, dtype=float)

    def fibers(self, vertices: Sequence[int]) -> Fibers:
        """Group states by their values on ``vertices``."""
        key = tuple(sorted(vertices))
        cache = self.__dict__.setdefault("_fiber_cache", {})
        if key not in cache:
            cache[key] = Fibers.by_vertices(self.states, key, self.q, self.probs)
        return cache[key]

    def block_fibers(self, B: Iterable[int]) -> Fibers:
        """Fibres of the heat-bath update of block ``B``: states agreeing off ``B``."""
        Bs = set(B)
        return self.fibers([v for v in range(self.n) if v not in Bs])

    def restrict(self, tau: Pinning) -> "GibbsTable":
        """Table of ``mu^{pinning + tau}`` derived from this one (no re-enumeration)."""
        mask = np.ones(self.N, dtype=bool)
        for v, a in tau.items:
            mask &= self.states[:, v] == a
        if not mask.any():
            raise InfeasibleError(f"pinning {tau.to_io()} has empty support")
        return GibbsTable(self.system, self.pinning.union(tau), self.states[mask].copy(), self.log_weights[mask].copy())

    def subtable(self, idx: np.ndarray, tau: Pinning) -> "GibbsTable":
        return GibbsTable(self.system, self.pinning.union(tau), self.states[idx].copy(), self.log_weights[idx].copy())

    # binary dump ---------------------------------------------------------
    MAGIC = b"SPNLGIBB"
    VERSION = 1

    def dump(self, path) -> None:
        """Write ``(state ordinal, probability)`` pairs with a versioned header."""
        with open(path, "wb") as fh:
            fh.write(self.MAGIC)
            fh.write(struct.pack("<IIIQd", self.VERSION, self.n, self.q, self.N, self.log_partition))
            fh.write(self.codes.astype("<i8").tobytes())
            fh.write(self.probs.astype("<f8").tobytes())

    @classmethod
    def load_dump(cls, path) -> tuple[int, int, float, np.ndarray, np.ndarray]:
        """Read a dump back as ``(n, q, log_z, codes, probs)``."""
        with open(path, "rb") as fh:
            if fh.read(8) != cls.MAGIC:
                raise ValueError("not a Gibbs table dump")
            version, n, q, N, log_z = struct.unpack("<IIIQd", fh.read(struct.calcsize("<IIIQd")))
            if version != cls.VERSION:
                raise ValueError(f"unsupported dump version {version}")
            codes = np.frombuffer(fh.read(8 * N), dtype="<i8").copy()
            probs = np.frombuffer(fh.read(8 * N), dtype="<f8").copy()
        return n, q, log_z, codes, probs


def enumerate_table(sys: SpinSystem, tau: Pinning = EMPTY, cap: int = DEFAULT_CAP) -> GibbsTable:
    """Exact table of ``mu^tau`` over its feasible states (lexicographic order)."""
    states, lw = enumerate_states(sys, tau, cap)
    return GibbsTable(sys, tau, states, lw)


def marginal(table: GibbsTable, x: int, a: int) -> float:
    """Exact ``mu^tau(sigma_x = a)`` for an unpinned vertex ``x``."""
    if x in table.pinning:
        raise SpinModelError(f"vertex {x} is pinned")
    return float(table.marginals[x, a])


def conditional_expectation(table: GibbsTable, B: Iterable[int], f: np.ndarray) -> np.ndarray:
    """State-indexed ``mu(f | sigma off B)``; ``f`` may be ``(N,)`` or ``(N, K)``."""
    Bs = set(B)
    if Bs & set(table.pinning.vertices):
        raise SpinModelError("block intersects pinned vertices")
    return table.block_fibers(Bs).expect(f)


# --------------------------------------------------------------------------
# pinning sweeps


def iter_pinnings(table: GibbsTable) -> Iterator[tuple[Pinning, np.ndarray]]:
    """All feasible pinnings on subsets of the free vertices, with their state indices.

    Order: subsets by bitmask (vertex ``free[0]`` is the lowest bit), then
    pinned values lexicographically.  The empty pinning comes first.
    """
    free = table.free
    for mask in range(1 << len(free)):
        U = [free[i] for i in range(len(free)) if mask >> i & 1]
        if not U:
            yield EMPTY, np.arange(table.N)
            continue
        fb = table.fibers(U) if len(U) < 4 else Fibers.by_vertices(table.states, U, table.q, table.probs)
        for idx in fb.members():
            vals = table.states[idx[0], U]
            yield Pinning(tuple(zip(U, vals.tolist()))), idx


def count_pinnings(table: GibbsTable) -> int:
    free = table.free
    total = 0
    for mask in range(1 << len(free)):
        U = [free[i] for i in range(len(free)) if mask >> i & 1]
        total += len(np.unique(projection_codes(table.states, U, table.q)))
    return total


def sample_pinnings(table: GibbsTable, k: int, rng: np.random.Generator) -> Iterator[tuple[Pinning, np.ndarray]]:
    """``k`` random feasible pinnings: a random state restricted to a random subset.

    The empty pinning is always included first.
    """
    free = list(table.free)
    yield EMPTY, np.arange(table.N)
    for _ in range(k - 1):
        size = int(rng.integers(0, len(free) + 1))
        U = sorted(rng.choice(free, size=size, replace=False).tolist()) if size else []
        s = table.states[int(rng.integers(table.N))]
        mask = np.ones(table.N, dtype=bool)
        for v in U:
            mask &= table.states[:, v] == s[v]
        yield Pinning(tuple((v, int(s[v])) for v in U)), np.flatnonzero(mask)


def pinning_sweep(table: GibbsTable, max_pinnings: int | None, rng: np.random.Generator | None):
    """Exhaustive pinning iterator when affordable, else a flagged sample."""
    if max_pinnings is not None and count_pinnings(table) > max_pinnings:
        return sample_pinnings(table, max_pinnings, rng or np.random.default_rng(0)), True
    return iter_pinnings(table), False


@dataclass
class SweepResult:
    """Extremum over pinnings together with the pinning attaining it."""

    value: float
    witness: Pinning
    sampled: bool
    pinnings: int


def _better(val, key, best_val, best_key, larger: bool) -> bool:
    if best_val is None:
        return True
    if val == best_val:
        return key < best_key
    return val > best_val if larger else val < best_val


def marginal_bound(
    sys_or_table, max_pinnings: int | None = None, rng: np.random.Generator | None = None, cap: int = DEFAULT_CAP
) -> SweepResult:
    """Smallest positive marginal ``mu^tau(sigma_x = a)`` over pinnings and free ``x``."""
    table = sys_or_table if isinstance(sys_or_table, GibbsTable) else enumerate_table(sys_or_table, cap=cap)
    it, sampled = pinning_sweep(table, max_pinnings, rng)
    best, best_key, wit, count = None, None, EMPTY, 0
    n, q = table.n, table.q
    for tau, idx in it:
        count += 1
        pinned = set(tau.vertices) | set(table.pinning.vertices)
        p = table.probs[idx]
        p = p / p.sum()
        st = table.states[idx]
        for x in range(n):
            if x in pinned:
                continue
            m = np.bincount(st[:, x], weights=p, minlength=q)
            pos = m[m > 0]
            v = float(pos.min())
            if v < 1.0 and _better(v, tau.key(n), best, best_key, larger=False):
                best, best_key, wit = v, tau.key(n), tau
    if best is None:
        best = 1.0
    return SweepResult(best, wit, sampled, count)


# --------------------------------------------------------------------------
# influence matrices


@dataclass
class InfluenceMatrix:
    """All-pairs influence matrix on the feasible vertex-spin pairs.

    ``entries[i, j] = mu(sigma_y = b | sigma_x = a) - mu(sigma_y = b)`` for
    ``index[i] = (x, a)``, ``index[j] = (y, b)``, ``x != y``; zero on
    diagonal blocks.
    """

    index: list[tuple[int, int]]
    entries: np.ndarray
    stationary_weights: np.ndarray
    symmetrized: np.ndarray

    @property
    def size(self) -> int:
        return len(self.index)


def _influence_arrays(states: np.ndarray, p: np.ndarray, free: Sequence[int], q: int):
    """Joint pair marginals of the free vertices; returns index and matrices."""
    nf = len(free)
    onehot = np.zeros((len(states), nf * q))
    rows = np.arange(len(states))
    for i, v in enumerate(free):
        onehot[rows, i * q + states[:, v]] = 1.0
    m = onehot.T @ p
    joint = onehot.T @ (p[:, None] * onehot)
    keep = np.flatnonzero(m > 0)
    block = np.repeat(np.arange(nf), q)[keep]
    same = block[:, None] == block[None, :]
    m = m[keep]
    joint = joint[np.ix_(keep, keep)]
    cov = joint - np.outer(m, m)
    cov[same] = 0.0
    index = [(free[k // q], k % q) for k in keep]
    return index, m, cov


def _sym_from_cov(m: np.ndarray, cov: np.ndarray) -> np.ndarray:
    sq = np.sqrt(m)
    s = cov / sq[:, None] / sq[None, :]
    return 0.5 * (s + s.T)


def influence_matrix(table: GibbsTable) -> InfluenceMatrix:
    """Exact influence matrix ``J^tau`` of the table's measure."""
    free = table.free
    index, m, cov = _influence_arrays(table.states, table.probs, free, table.q)
    J = cov / m[:, None]
    nu = m / max(len(free), 1)
    return InfluenceMatrix(index, J, nu, _sym_from_cov(m, cov))


def lambda1(J: InfluenceMatrix | np.ndarray) -> float:
    """Largest eigenvalue of an influence matrix (via its symmetrised form)."""
    S = J.symmetrized if isinstance(J, InfluenceMatrix) else np.asarray(J)
    if S.size == 0:
        return 0.0
    vals = np.linalg.eigvalsh(S)
    return float(vals[-1])


def spectral_independence(
    sys_or_table, max_pinnings: int | None = None, rng: np.random.Generator | None = None, cap: int = DEFAULT_CAP
) -> SweepResult:
    """``eta = max_tau lambda1(J^tau)`` with the maximising pinning."""
    table = sys_or_table if isinstance(sys_or_table, GibbsTable) else enumerate_table(sys_or_table, cap=cap)
    it, sampled = pinning_sweep(table, max_pinnings, rng)
    best, best_key, wit, count = None, None, EMPTY, 0
    n, q = table.n, table.q
    for tau, idx in it:
        count += 1
        pinned = set(tau.vertices) | set(table.pinning.vertices)
        free = [v for v in range(n) if v not in pinned]
        if len(free) < 2:
            val = 0.0
        else:
            p = table.probs[idx]
            _, m, cov = _influence_arrays(table.states[idx], p / p.sum(), free, q)
            val = lambda1(_sym_from_cov(m, cov))
        if _better(val, tau.key(n), best, best_key, larger=True):
            best, best_key, wit = val, tau.key(n), tau
    return SweepResult(float(best), wit, sampled, count)


def all_pinned_lambda1(table: GibbsTable) -> Iterator[tuple[Pinning, np.ndarray, float]]:
    """``(tau, state indices, lambda1(J^tau))`` for every feasible pinning."""
    n, q = table.n, table.q
    for tau, idx in iter_pinnings(table):
        pinned = set(tau.vertices) | set(table.pinning.vertices)
        free = [v for v in range(n) if v not in pinned]
        if len(free) < 2:
            yield tau, idx, 0.0
            continue
        p = table.probs[idx]
        _, m, cov = _influence_arrays(table.states[idx], p / p.sum(), free, q)
        yield tau, idx, lambda1(_sym_from_cov(m, cov))


# --------------------------------------------------------------------------
# Dobrushin dependency matrix


def _site_law(sys: SpinSystem, y: int, nbrs: Sequence[int], edge_ids: Sequence[int], conf: Sequence[int]):
    logits = sys.log_field[y].copy()
    for z, e, c in zip(nbrs, edge_ids, conf):
        u, _ = sys.graph.edges[e]
        logits = logits + (sys.log_edge[e][:, c] if u == y else sys.log_edge[e][c, :])
    if not np.isfinite(logits).any():
        return None
    w = np.exp(logits - logits[np.isfinite(logits)].max())
    return w / w.sum()


def dobrushin_matrix(sys: SpinSystem, tau: Pinning = EMPTY, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Dependency matrix ``R`` (or ``R^tau``) of single-site conditional laws.

    ``R[x, y]`` is the largest total-variation distance between the laws at
    ``y`` given two neighbourhood configurations that differ only at ``x``.
    A neighbourhood configuration counts when every neighbour spin has
    positive field and the law at ``y`` is well defined.  Under a pinning,
    pinned neighbours are fixed and rows/columns of pinned vertices vanish.
    """
    g, q = sys.graph, sys.q
    pins = tau.as_dict()
    R = np.zeros((g.n, g.n))
    edge_of = {}
    for e, (u, v) in enumerate(g.edges):
        edge_of[(u, v)] = edge_of[(v, u)] = e
    for y in range(g.n):
        if y in pins:
            continue
        nbrs = list(g.adjacency[y])
        if not nbrs:
            continue
        if q ** (len(nbrs) + 1) > cap:
            raise CapExceeded(f"neighbourhood of {y} too large")
        eids = [edge_of[(y, z)] for z in nbrs]
        choices = []
        for z in nbrs:
            if z in pins:
                choices.append([pins[z]])
            else:
                choices.append([a for a in range(q) if sys.effective_fields[z, a] > 0])
        laws = {}
        for conf in itertools.product(*choices):
            law = _site_law(sys, y, nbrs, eids, conf)
            if law is not None:
                laws[conf] = law
        for i, x in enumerate(nbrs):
            if x in pins:
                continue
            worst = 0.0
            for conf, law in laws.items():
                for b in choices[i]:
                    if b <= conf[i]:
                        continue
                    other = conf[:i] + (b,) + conf[i + 1 :]
                    if other in laws:
                        worst = max(worst, 0.5 * float(np.abs(law - laws[other]).sum()))
            R[x, y] = worst
    return R


@dataclass
class SpectralRadius:
    """Perron root estimate with rigorous Collatz-Wielandt bracket of ``R + delta O``."""

    value: float
    upper: float
    perturbed: tuple[float, float]
    deltas: tuple[float, float]
    iterations: int


def _perron_power(A: np.ndarray, tol: float, max_iter: int) -> tuple[float, float, np.ndarray, int]:
    """Power iteration on a positive matrix with Collatz-Wielandt bounds."""
    n = len(A)
    shift = float(np.abs(A).sum(axis=1).max())
    vals, vecs = np.linalg.eig(A)
    w = np.abs(vecs[:, int(np.argmax(vals.real))].real) + 1e-300
    w /= w.sum()
    B = A + shift * np.eye(n)
    lo, hi = 0.0, np.inf
    for it in range(1, max_iter + 1):
        Aw = A @ w
        ratio = Aw / w
        lo, hi = float(ratio.min()), float(ratio.max())
        if hi - lo <= tol * max(1.0, hi):
            return lo, hi, w, it
        w = B @ w
        w /= w.sum()
    raise RuntimeError(f"power iteration did not converge: bracket [{lo}, {hi}]")


def spectral_radius(R: np.ndarray, delta: float = 1e-7, tol: float = 1e-10, max_iter: int = 100000) -> SpectralRadius:
    """Perron root of a nonnegative matrix via power iteration on ``R + delta O``.

    Runs at ``delta`` and ``delta / 2`` and extrapolates linearly to zero.
    ``upper`` is a rigorous upper bound (``rho`` is monotone in entries).
    """
    R = np.asarray(R, dtype=float)
    n = len(R)
    if n == 0 or not R.any():
        return SpectralRadius(0.0, 0.0 if n == 0 else n * delta, (0.0, 0.0), (delta, delta / 2), 0)
    O = np.ones((n, n))
    d1, d2 = delta, delta / 2
    lo1, hi1, _, it1 = _perron_power(R + d1 * O, tol, max_iter)
    lo2, hi2, _, it2 = _perron_power(R + d2 * O, tol, max_iter)
    r1, r2 = 0.5 * (lo1 + hi1), 0.5 * (lo2 + hi2)
    est = max(2 * r2 - r1, 0.0)
    est = min(est, hi2)
    inf_norm = float(R.sum(axis=1).max())
    if est > inf_norm + tol:
        raise RuntimeError(f"spectral radius {est} exceeds infinity norm {inf_norm}")
    return SpectralRadius(est, hi2, (r1, r2), (d1, d2), it1 + it2)
