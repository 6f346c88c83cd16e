"""Markov chains as vectorised samplers and as exact transition matrices.

Samplers act on a batch of configurations ``(R, n)`` at once; exact
matrices are scipy CSR matrices indexed by a :class:`GibbsTable`'s state
order.  Pinned vertices may be selected by every chain, in which case the
step is a no-op (the lazy convention).
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .gibbs import GibbsTable
from .model import EMPTY, Pinning, SpinModelError, SpinSystem, all_configurations

ROW_TOL = 1e-11
STATIONARY_TOL = 1e-10


class StationarityError(RuntimeError):
    """An exact kernel failed its row-sum or stationarity check."""


# --------------------------------------------------------------------------
# block weights


@dataclass(frozen=True)
class BlockWeights:
    """Distribution ``alpha`` over blocks of vertices."""

    blocks: tuple[frozenset[int], ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.blocks) != len(self.probs) or not self.blocks:
            raise SpinModelError("need matching, nonempty blocks and probabilities")
        blocks = tuple(frozenset(int(v) for v in b) for b in self.blocks)
        if any(not b for b in blocks):
            raise SpinModelError("blocks must be nonempty")
        p = np.asarray(self.probs, dtype=float)
        if np.any(p <= 0):
            raise SpinModelError("block probabilities must be positive")
        if abs(p.sum() - 1.0) > 1e-12:
            raise SpinModelError(f"block probabilities sum to {p.sum()}, not 1")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "probs", tuple(float(x) for x in p))

    @classmethod
    def from_mapping(cls, weights: dict) -> "BlockWeights":
        items = list(weights.items())
        return cls(tuple(frozenset(b) for b, _ in items), tuple(float(w) for _, w in items))

    def covers(self, n: int) -> bool:
        return set().union(*self.blocks) >= set(range(n))

    @property
    def max_block(self) -> int:
        return max(len(b) for b in self.blocks)

    def coverage(self, n: int) -> np.ndarray:
        c = np.zeros(n)
        for b, p in zip(self.blocks, self.probs):
            for v in b:
                c[v] += p
        return c


def coverage_delta(alpha: BlockWeights, n: int) -> float:
    """Minimum over vertices of the probability that the chosen block contains it."""
    return float(alpha.coverage(n).min())


def singletons(n: int) -> BlockWeights:
    return BlockWeights(tuple(frozenset([v]) for v in range(n)), tuple([1.0 / n] * n))


def uniform_subsets(n: int, ell: int) -> BlockWeights:
    subs = list(itertools.combinations(range(n), ell))
    return BlockWeights(tuple(frozenset(s) for s in subs), tuple([1.0 / len(subs)] * len(subs)))


def partition_blocks(classes: Sequence[Iterable[int]]) -> BlockWeights:
    k = len(classes)
    return BlockWeights(tuple(frozenset(c) for c in classes), tuple([1.0 / k] * k))


def ball_blocks(graph, r: int) -> BlockWeights:
    """Uniform weights over the radius-``r`` graph balls around each vertex."""
    balls = []
    for x in range(graph.n):
        ball, frontier = {x}, {x}
        for _ in range(r):
            frontier = {w for u in frontier for w in graph.adjacency[u]} - ball
            ball |= frontier
        balls.append(frozenset(ball))
    return BlockWeights(tuple(balls), tuple([1.0 / graph.n] * graph.n))


def random_block_weights(n: int, rng: np.random.Generator, num_blocks: int | None = None, max_size: int | None = None) -> BlockWeights:
    """Random covering block distribution (every vertex lies in some block)."""
    num_blocks = num_blocks or int(rng.integers(2, n + 2))
    max_size = max_size or n
    blocks = []
    for _ in range(num_blocks):
        size = int(rng.integers(1, max_size + 1))
        blocks.append(frozenset(rng.choice(n, size=size, replace=False).tolist()))
    missing = set(range(n)) - set().union(*blocks)
    for v in sorted(missing):
        i = int(rng.integers(len(blocks)))
        blocks[i] = blocks[i] | {v}
    w = rng.dirichlet(np.ones(len(blocks)))
    w = np.maximum(w, 1e-3)
    w /= w.sum()
    merged: dict[frozenset, float] = {}
    for b, p in zip(blocks, w):
        merged[b] = merged.get(b, 0.0) + float(p)
    bl = sorted(merged, key=lambda s: sorted(s))
    p = np.array([merged[b] for b in bl])
    p /= p.sum()
    return BlockWeights(tuple(bl), tuple(p))


# --------------------------------------------------------------------------
# kernels


@dataclass(eq=False)
class Kernel:
    """A Markov chain: a batch sampler plus an exact matrix builder.

    ``meta`` holds ``M`` (largest updated block) and ``D`` (largest
    per-step probability that a given vertex is selected) when known.
    """

    name: str
    system: SpinSystem
    pinning: Pinning
    sampler: Callable[[np.ndarray, np.random.Generator], np.ndarray]
    builder: Callable[[GibbsTable], sp.csr_matrix]
    meta: dict = field(default_factory=dict)
    operator: Callable[[GibbsTable, np.ndarray], np.ndarray] | None = None
    reversible: bool = True
    _cache: dict = field(default_factory=dict, repr=False)

    def step(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """One step for every row of ``states`` (a new array is returned)."""
        s = np.array(states, dtype=np.int8, copy=True)
        if s.ndim == 1:
            return self.sampler(s[None, :], rng)[0]
        return self.sampler(s, rng)

    def run(self, state: np.ndarray, steps: int, rng: np.random.Generator) -> np.ndarray:
        s = np.array(state, dtype=np.int8)[None, :]
        for _ in range(steps):
            s = self.sampler(s, rng)
        return s[0]

    def _check_table(self, table: GibbsTable) -> None:
        if table.system is not self.system or table.pinning.items != self.pinning.items:
            raise SpinModelError("table does not describe this kernel's measure")

    def matrix(self, table: GibbsTable, check: bool = True) -> sp.csr_matrix:
        """Exact transition matrix on the table's states (cached)."""
        self._check_table(table)
        key = id(table)
        if key not in self._cache:
            P = self.builder(table).tocsr()
            P.sum_duplicates()
            if check:
                verify_kernel(P, table.probs, self.name)
            self._cache[key] = (table, P)
        return self._cache[key][1]

    def dense(self, table: GibbsTable) -> np.ndarray:
        return self.matrix(table).toarray()

    def stationary(self, table: GibbsTable) -> np.ndarray:
        self._check_table(table)
        return table.probs

    def apply(self, table: GibbsTable, f: np.ndarray) -> np.ndarray:
        """``(P f)(sigma) = sum_sigma' P(sigma, sigma') f(sigma')``."""
        if self.operator is not None:
            self._check_table(table)
            return self.operator(table, f)
        return self.matrix(table) @ np.asarray(f, dtype=float)


def verify_kernel(P: sp.spmatrix, mu: np.ndarray, name: str = "kernel") -> None:
    rows = np.asarray(P.sum(axis=1)).ravel()
    if np.max(np.abs(rows - 1.0)) > ROW_TOL:
        raise StationarityError(f"{name}: row sums off by {np.max(np.abs(rows - 1.0)):.3e}")
    tv = 0.5 * float(np.abs(P.T @ mu - mu).sum())
    if tv > STATIONARY_TOL:
        raise StationarityError(f"{name}: stationarity violated, TV = {tv:.3e}")


def heat_bath_projection(table: GibbsTable, B: Iterable[int]) -> sp.csr_matrix:
    """Matrix of resampling ``B`` (minus pinned vertices) from the conditional law."""
    pinned = set(table.pinning.vertices)
    free_B = set(B) - pinned
    if not free_B:
        return sp.identity(table.N, format="csr")
    fb = table.block_fibers(free_B)
    rows, cols, vals = [], [], []
    for idx in fb.members():
        p = table.probs[idx]
        p = p / p.sum()
        k = len(idx)
        rows.append(np.repeat(idx, k))
        cols.append(np.tile(idx, k))
        vals.append(np.tile(p, k))
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(table.N, table.N)
    )


def _block_operator(alpha: BlockWeights):
    def op(table: GibbsTable, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        pinned = set(table.pinning.vertices)
        out = np.zeros_like(f)
        for b, p in zip(alpha.blocks, alpha.probs):
            fb = b - pinned
            out += p * (table.block_fibers(fb).expect(f) if fb else f)
        return out

    return op


def _pinned_mask(sys: SpinSystem, tau: Pinning) -> np.ndarray:
    mask = np.zeros(sys.n, dtype=bool)
    mask[list(tau.vertices)] = True
    return mask


def glauber(sys: SpinSystem, tau: Pinning = EMPTY) -> Kernel:
    """Heat-bath Glauber dynamics for ``mu^tau``; the vertex is uniform over all of V."""
    nbr, la = sys.incident_tables()
    pinned = _pinned_mask(sys, tau)
    n, q = sys.n, sys.q

    def sampler(S: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        R = len(S)
        x = rng.integers(n, size=R)
        act = ~pinned[x]
        rows = np.flatnonzero(act)
        xs = x[rows]
        nb_spins = S[rows[:, None], nbr[xs]]
        contrib = la[xs[:, None], np.arange(nbr.shape[1])[None, :], :, nb_spins]
        logits = sys.log_field[xs] + contrib.sum(axis=1)
        u = rng.random(R)  # keep stream consumption independent of pinning
        new = _sample_categorical_u(logits, u[rows])
        S[rows, xs] = new
        return S

    def builder(table: GibbsTable) -> sp.csr_matrix:
        P = sp.csr_matrix((table.N, table.N))
        for v in range(n):
            P = P + heat_bath_projection(table, [v]) / n
        return P

    def op(table, f):
        f = np.asarray(f, dtype=float)
        out = np.zeros_like(f)
        for v in range(n):
            out += (f if pinned[v] else table.block_fibers([v]).expect(f)) / n
        return out

    return Kernel("glauber", sys, tau, sampler, builder, {"M": 1, "D": 1.0 / n}, op)


def _sample_categorical_u(logits: np.ndarray, u: np.ndarray) -> np.ndarray:
    mx = np.max(logits, axis=1, keepdims=True)
    if np.any(~np.isfinite(mx)):
        raise SpinModelError("conditional law with empty support")
    w = np.exp(logits - mx)
    c = np.cumsum(w, axis=1)
    return np.argmax(c > (u * c[:, -1])[:, None], axis=1)


def block_dynamics(sys: SpinSystem, alpha: BlockWeights, tau: Pinning = EMPTY) -> Kernel:
    """Heat-bath block dynamics ``P_alpha = sum_B alpha_B Pi_B`` for ``mu^tau``."""
    if not alpha.covers(sys.n):
        warnings.warn("block weights do not cover V: coverage delta is 0", stacklevel=2)
    pins = tau.as_dict()
    blocks = alpha.blocks
    probs = np.asarray(alpha.probs)
    free_parts = [sorted(b - set(pins)) for b in blocks]
    cands = [all_configurations(len(F), sys.q) for F in free_parts]

    def sampler(S: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        R = len(S)
        choice = rng.choice(len(blocks), size=R, p=probs)
        u = rng.random(R)
        for b in np.unique(choice):
            F = free_parts[b]
            if not F:
                continue
            rows = np.flatnonzero(choice == b)
            C = cands[b]
            trial = np.repeat(S[rows][:, None, :], len(C), axis=1)
            trial[:, :, F] = C[None, :, :]
            lw = sys.log_weights(trial.reshape(-1, sys.n)).reshape(len(rows), len(C))
            pick = _sample_categorical_u(lw, u[rows])
            S[np.ix_(rows, F)] = C[pick]
        return S

    def builder(table: GibbsTable) -> sp.csr_matrix:
        P = sp.csr_matrix((table.N, table.N))
        for b, p in zip(blocks, probs):
            P = P + p * heat_bath_projection(table, b)
        return P

    D = float(alpha.coverage(sys.n).max())
    return Kernel("block", sys, tau, sampler, builder, {"M": alpha.max_block, "D": D}, _block_operator(alpha))


# --------------------------------------------------------------------------
# flip dynamics


@dataclass(frozen=True)
class FlipParams:
    """Flip probabilities ``p_1..p_6`` with their provenance."""

    p: tuple[float, ...]
    source: str = ""

    def __post_init__(self):
        p = tuple(float(x) for x in self.p)
        if not 1 <= len(p) <= 6:
            raise SpinModelError("flip parameters are p_1..p_s with s <= 6")
        if any(not 0.0 <= x <= 1.0 for x in p):
            raise SpinModelError("flip probabilities must lie in [0, 1]")
        object.__setattr__(self, "p", p)

    def prob(self, s: int) -> float:
        return self.p[s - 1] if 1 <= s <= len(self.p) else 0.0

    @property
    def max_size(self) -> int:
        return max((s for s in range(1, len(self.p) + 1) if self.p[s - 1] > 0), default=0)

    @classmethod
    def load(cls, path) -> "FlipParams":
        """Read ``{"p": [p1, ..., p6], "source": "..."}`` (a bare array is accepted)."""
        data = json.loads(Path(path).read_text())
        if isinstance(data, list):
            return cls(tuple(data), "")
        return cls(tuple(data["p"]), str(data.get("source", "")))


def kempe_component(graph, sigma: Sequence[int], x: int, a: int) -> list[int]:
    """Vertices reachable from ``x`` along paths coloured alternately ``sigma_x`` and ``a``."""
    c = sigma[x]
    if a == c:
        return [x]
    seen = {x}
    stack = [x]
    while stack:
        u = stack.pop()
        want = a if sigma[u] == c else c
        for w in graph.adjacency[u]:
            if w not in seen and sigma[w] == want:
                seen.add(w)
                stack.append(w)
    return sorted(seen)


def _flip_target(sigma: np.ndarray, comp: Sequence[int], c1: int, c2: int) -> np.ndarray:
    t = sigma.copy()
    for v in comp:
        t[v] = c2 if sigma[v] == c1 else c1
    return t


def flip_dynamics(sys: SpinSystem, params: FlipParams, tau: Pinning = EMPTY) -> Kernel:
    """Flip dynamics for proper colourings of ``mu^tau``.

    Picks ``x`` uniform in V and ``a`` uniform in ``[q]``; if the bicoloured
    component ``L`` of ``x`` contains a pinned vertex nothing happens,
    otherwise its two colours are swapped with probability ``p_|L| / |L|``.
    """
    if sys.kind != "colorings":
        raise SpinModelError("flip dynamics needs a colorings system")
    g, n, q = sys.graph, sys.n, sys.q
    pinned = _pinned_mask(sys, tau)
    A = g.adjacency_matrix().astype(np.uint8)
    pvec = np.zeros(n + 1)
    for s in range(1, min(n, 6) + 1):
        pvec[s] = params.prob(s) / s

    def sampler(S: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        R = len(S)
        x = rng.integers(n, size=R)
        a = rng.integers(q, size=R)
        u = rng.random(R)
        r = np.arange(R)
        c = S[r, x]
        live = a != c
        allowed = (S == c[:, None]) | (S == a[:, None])
        reach = np.zeros((R, n), dtype=bool)
        reach[r, x] = True
        for _ in range(n):
            grow = ((reach.astype(np.uint8) @ A) > 0) & allowed
            new = reach | grow
            if np.array_equal(new, reach):
                break
            reach = new
        size = reach.sum(axis=1)
        ok = live & ~(reach & pinned[None, :]).any(axis=1) & (u < pvec[size])
        rows = np.flatnonzero(ok)
        if len(rows):
            sub = S[rows]
            rr = reach[rows]
            c1 = c[rows][:, None]
            c2 = a[rows][:, None]
            swapped = np.where(sub == c1, c2, c1)
            S[rows] = np.where(rr, swapped, sub).astype(S.dtype)
        return S

    def builder(table: GibbsTable) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        for i, sigma in enumerate(table.states):
            stay = 1.0
            for x in range(n):
                for a in range(q):
                    if a == sigma[x]:
                        continue
                    comp = kempe_component(g, sigma, x, a)
                    if any(pinned[v] for v in comp):
                        continue
                    pr = params.prob(len(comp)) / len(comp) / (n * q)
                    if pr == 0:
                        continue
                    j = int(table.index_of(_flip_target(sigma, comp, sigma[x], a))[0])
                    if j < 0:
                        raise SpinModelError("flip left the state space")
                    rows.append(i)
                    cols.append(j)
                    vals.append(pr)
                    stay -= pr
            rows.append(i)
            cols.append(i)
            vals.append(stay)
        return sp.csr_matrix((vals, (rows, cols)), shape=(table.N, table.N))

    return Kernel("flip", sys, tau, sampler, builder, {"M": params.max_size, "D": None, "params": params.p})


def flip_selection_D(sys: SpinSystem, params: FlipParams, states: np.ndarray) -> float:
    """Largest per-step probability that a vertex lies in the selected flip block.

    Only blocks that can actually change (``a != sigma_y`` and ``p_s > 0``)
    count; the selection ignores the pinning.
    """
    g, n, q = sys.graph, sys.n, sys.q
    best = 0.0
    for sigma in states:
        hit = np.zeros(n)
        for y in range(n):
            for a in range(q):
                if a == sigma[y]:
                    continue
                comp = kempe_component(g, sigma, y, a)
                if params.prob(len(comp)) > 0:
                    hit[comp] += 1.0 / (n * q)
        best = max(best, float(hit.max()))
    return best


# --------------------------------------------------------------------------
# Swendsen-Wang


def _potts_beta(sys: SpinSystem) -> float:
    if sys.kind not in ("ising", "potts"):
        raise SpinModelError("Swendsen-Wang needs an Ising/Potts system")
    beta = float(sys.params.get("beta", 0.0))
    if beta < 0:
        raise SpinModelError("Swendsen-Wang needs a ferromagnetic system (beta >= 0)")
    h = sys.params.get("h")
    if h is not None and np.any(np.asarray(h, dtype=float) != 0):
        raise SpinModelError("Swendsen-Wang is implemented for zero external field")
    if sys.graph.boundary_edges:
        raise SpinModelError("Swendsen-Wang is implemented without boundary")
    return beta


def swendsen_wang(sys: SpinSystem) -> Kernel:
    """Swendsen-Wang dynamics for the zero-field ferromagnetic Ising/Potts model.

    The exact matrix is the composition of the spin-to-edge and
    edge-to-spin conditionals of the joint spin-edge measure.
    """
    beta = _potts_beta(sys)
    g, n, q = sys.graph, sys.n, sys.q
    p = -math.expm1(-beta)
    eu = np.array([u for u, _ in g.edges], dtype=np.intp)
    ev = np.array([v for _, v in g.edges], dtype=np.intp)

    def sampler(S: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        R = len(S)
        keep = (S[:, eu] == S[:, ev]) & (rng.random((R, len(eu))) < p)
        rr, ee = np.nonzero(keep)
        src = rr * n + eu[ee]
        dst = rr * n + ev[ee]
        G = sp.csr_matrix((np.ones(len(src)), (src, dst)), shape=(R * n, R * n))
        ncomp, labels = connected_components(G, directed=False)
        colours = rng.integers(q, size=ncomp)
        return colours[labels].reshape(R, n).astype(S.dtype)

    def builder(table: GibbsTable) -> sp.csr_matrix:
        from .edwards_sokal import sw_step_composition

        return sp.csr_matrix(sw_step_composition(table))

    return Kernel("swendsen_wang", sys, EMPTY, sampler, builder, {"p": p})


def sw_matrix_direct(table: GibbsTable) -> np.ndarray:
    """Swendsen-Wang matrix by enumerating, per state, every kept-edge subset.

    Independent of the joint-measure composition; used as a cross-check.
    """
    sys = table.system
    beta = _potts_beta(sys)
    g, n, q = sys.graph, sys.n, sys.q
    p = -math.expm1(-beta)
    P = np.zeros((table.N, table.N))
    for i, sigma in enumerate(table.states):
        mono = [e for e, (u, v) in enumerate(g.edges) if sigma[u] == sigma[v]]
        for r in range(len(mono) + 1):
            for kept in itertools.combinations(mono, r):
                w = p**r * (1 - p) ** (len(mono) - r)
                if w == 0:
                    continue
                comps = _components(n, [g.edges[e] for e in kept])
                k = len(comps)
                for colours in itertools.product(range(q), repeat=k):
                    t = np.empty(n, dtype=np.int8)
                    for c, comp in zip(colours, comps):
                        t[comp] = c
                    j = int(table.index_of(t)[0])
                    P[i, j] += w / q**k
    return P


def _components(n: int, edges) -> list[list[int]]:
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
    groups: dict[int, list[int]] = {}
    for v in range(n):
        groups.setdefault(find(v), []).append(v)
    return [groups[k] for k in sorted(groups, key=lambda r: min(groups[r]))]


# --------------------------------------------------------------------------
# select-update


Selector = Callable[[np.ndarray], Sequence[tuple[frozenset, object, float]]]
Updater = Callable[[np.ndarray, frozenset, object, Pinning], Sequence[tuple[np.ndarray, float]]]


def heat_bath_updater(sys: SpinSystem) -> Updater:
    """Resample the free part of the block from its conditional law."""

    def update(sigma: np.ndarray, B: frozenset, tag, tau: Pinning):
        F = sorted(set(B) - set(tau.vertices))
        if not F:
            return [(sigma.copy(), 1.0)]
        C = all_configurations(len(F), sys.q)
        trial = np.repeat(sigma[None, :], len(C), axis=0)
        trial[:, F] = C
        lw = sys.log_weights(trial)
        w = np.exp(lw - lw.max())
        w /= w.sum()
        return [(trial[k], float(w[k])) for k in range(len(C)) if w[k] > 0]

    return update


def fixed_selector(alpha: BlockWeights) -> Selector:
    """Configuration-independent selection ``alpha``."""
    opts = [(b, None, p) for b, p in zip(alpha.blocks, alpha.probs)]
    return lambda sigma: opts


def select_update(sys: SpinSystem, selector: Selector, updater: Updater, tau: Pinning = EMPTY, name: str = "select_update") -> Kernel:
    """Generic select-update chain.

    ``selector(sigma)`` lists ``(block, tag, prob)``; the tag is passed to
    ``updater(sigma, block, tag, tau)``, which lists ``(new state, prob)``.
    ``meta`` (``M``, ``D``) is filled in when the exact matrix is built,
    from the selector's support over the enumerated states.
    """
    meta: dict = {"M": None, "D": None}

    def sampler(S: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        for r in range(len(S)):
            opts = selector(S[r])
            w = np.array([p for _, _, p in opts])
            B, tag, _ = opts[int(rng.choice(len(opts), p=w / w.sum()))]
            outs = updater(S[r], B, tag, tau)
            pw = np.array([p for _, p in outs])
            S[r] = outs[int(rng.choice(len(outs), p=pw / pw.sum()))][0]
        return S

    def builder(table: GibbsTable) -> sp.csr_matrix:
        P = np.zeros((table.N, table.N))
        M, D = 0, 0.0
        for i, sigma in enumerate(table.states):
            hit = np.zeros(sys.n)
            for B, tag, pb in selector(sigma):
                if pb <= 0:
                    continue
                M = max(M, len(B))
                hit[sorted(B)] += pb
                for t, pt in updater(sigma, B, tag, tau):
                    j = int(table.index_of(t)[0])
                    if j < 0:
                        raise StationarityError(f"{name}: update left the state space")
                    P[i, j] += pb * pt
            D = max(D, float(hit.max()))
        meta["M"], meta["D"] = M, D
        return sp.csr_matrix(P)

    return Kernel(name, sys, tau, sampler, builder, meta)


def flip_as_select_update(sys: SpinSystem, params: FlipParams, tau: Pinning = EMPTY) -> Kernel:
    """The flip chain written as a select-update chain (for cross-checks).

    A block is a bicoloured component (tagged with its colour pair) chosen
    with probability ``s / (n q)``; the update swaps it with probability
    ``p_s / s`` unless it meets the pinning.
    """
    g, n, q = sys.graph, sys.n, sys.q

    def selector(sigma):
        out: dict[tuple, float] = {}
        for x in range(n):
            for a in range(q):
                if a == sigma[x]:
                    continue
                comp = kempe_component(g, sigma, x, a)
                if params.prob(len(comp)) == 0:
                    continue
                key = (frozenset(comp), tuple(sorted((int(sigma[x]), a))))
                out[key] = out.get(key, 0.0) + 1.0 / (n * q)
        opts = [(b, tag, p) for (b, tag), p in out.items()]
        rest = 1.0 - sum(p for _, _, p in opts)
        if rest > 0:
            opts.append((frozenset(), None, rest))
        return opts

    def updater(sigma, B, tag, tau_):
        if not B or set(B) & set(tau_.vertices):
            return [(sigma.copy(), 1.0)]
        s = len(B)
        pr = params.prob(s) / s
        return [(_flip_target(sigma, sorted(B), *tag), pr), (sigma.copy(), 1.0 - pr)]

    return select_update(sys, selector, updater, tau, name="flip_select_update")
