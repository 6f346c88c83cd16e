"""Graphs, spin systems, pinnings.

Spins are 0-indexed internally (``0..q-1``); every file format and CLI
surface uses ``1..q``.  Boundary conditions are folded into per-vertex
effective fields when a :class:`SpinSystem` is built, so nothing downstream
ever looks at the boundary again.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

#: Exhaustive feasibility checks run automatically below this many states.
AUTO_CHECK_STATES = 1 << 16


class SpinModelError(ValueError):
    """Invalid graph, model parameters, pinning or configuration."""


class InfeasibleError(SpinModelError):
    """The state space (or a pinned state space) is empty."""


class CapExceeded(RuntimeError):
    """An exhaustive computation would exceed the configured state cap."""


# --------------------------------------------------------------------------
# graphs


@dataclass(frozen=True)
class Graph:
    """Undirected graph on interior vertices ``0..n-1`` plus optional boundary.

    Boundary vertices carry ids ``>= n``; every boundary edge ``(x, b)``
    joins an interior vertex ``x`` to a boundary vertex ``b``.
    """

    n: int
    edges: tuple[tuple[int, int], ...] = ()
    boundary_vertices: tuple[int, ...] = ()
    boundary_edges: tuple[tuple[int, int], ...] = ()
    adjacency: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    max_degree: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise SpinModelError("graph needs at least one vertex")
        norm = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise SpinModelError(f"self-loop at {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise SpinModelError(f"edge ({u}, {v}) out of range")
            norm.append((min(u, v), max(u, v)))
        if len(set(norm)) != len(norm):
            raise SpinModelError("duplicate edge")
        bset = set(int(b) for b in self.boundary_vertices)
        if any(b < self.n for b in bset):
            raise SpinModelError("boundary vertex ids must be >= n")
        bnorm = []
        for x, b in self.boundary_edges:
            x, b = int(x), int(b)
            if x >= self.n and b < self.n:
                x, b = b, x
            if not (0 <= x < self.n) or b not in bset:
                raise SpinModelError(f"boundary edge ({x}, {b}) must join interior and boundary")
            bnorm.append((x, b))
        if len(set(bnorm)) != len(bnorm):
            raise SpinModelError("duplicate boundary edge")
        object.__setattr__(self, "edges", tuple(norm))
        object.__setattr__(self, "boundary_vertices", tuple(sorted(bset)))
        object.__setattr__(self, "boundary_edges", tuple(bnorm))
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in norm:
            adj[u].append(v)
            adj[v].append(u)
        object.__setattr__(self, "adjacency", tuple(tuple(sorted(a)) for a in adj))
        deg = [len(a) for a in adj]
        for x, _ in bnorm:
            deg[x] += 1
        object.__setattr__(self, "max_degree", max(deg))

    @property
    def m(self) -> int:
        return len(self.edges)

    def degree(self, x: int) -> int:
        return len(self.adjacency[x])

    def neighbors(self, x: int) -> tuple[int, ...]:
        return self.adjacency[x]

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adjacency[u]

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=bool)
        for u, v in self.edges:
            a[u, v] = a[v, u] = True
        return a

    def components(self, vertices: Iterable[int] | None = None) -> list[list[int]]:
        """Connected components of the subgraph induced by ``vertices``."""
        keep = set(range(self.n)) if vertices is None else set(vertices)
        seen: set[int] = set()
        out = []
        for s in sorted(keep):
            if s in seen:
                continue
            comp, stack = [], [s]
            seen.add(s)
            while stack:
                u = stack.pop()
                comp.append(u)
                for w in self.adjacency[u]:
                    if w in keep and w not in seen:
                        seen.add(w)
                        stack.append(w)
            out.append(sorted(comp))
        return out


@dataclass(frozen=True)
class Partition:
    """Cover of the vertex set by independent sets ``V_1..V_k``."""

    classes: tuple[frozenset[int], ...]

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(frozenset(int(v) for v in c) for c in self.classes))

    @property
    def k(self) -> int:
        return len(self.classes)

    def validate(self, graph: Graph) -> None:
        seen: set[int] = set()
        for c in self.classes:
            if seen & c:
                raise SpinModelError("partition classes overlap")
            seen |= c
            for u in c:
                if any(w in c for w in graph.adjacency[u]):
                    raise SpinModelError(f"class {sorted(c)} is not independent")
        if seen != set(range(graph.n)):
            raise SpinModelError("partition does not cover V")
        if self.k > graph.max_degree + 1:
            raise SpinModelError("more than Delta + 1 classes")


def greedy_partition(graph: Graph) -> Partition:
    """Greedy proper colouring in vertex order; uses at most ``Delta + 1`` classes."""
    colour = [-1] * graph.n
    for v in range(graph.n):
        used = {colour[w] for w in graph.adjacency[v]}
        c = 0
        while c in used:
            c += 1
        colour[v] = c
    k = max(colour) + 1
    return Partition(tuple(frozenset(v for v in range(graph.n) if colour[v] == c) for c in range(k)))


# --------------------------------------------------------------------------
# pinnings


@dataclass(frozen=True)
class Pinning:
    """Immutable partial assignment ``U -> [q]`` (0-indexed spins)."""

    items: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        d = {}
        for v, a in self.items:
            v, a = int(v), int(a)
            if v in d and d[v] != a:
                raise SpinModelError(f"conflicting pins at vertex {v}")
            d[v] = a
        object.__setattr__(self, "items", tuple(sorted(d.items())))

    @classmethod
    def from_dict(cls, d: Mapping[int, int]) -> "Pinning":
        return cls(tuple(d.items()))

    @property
    def vertices(self) -> tuple[int, ...]:
        return tuple(v for v, _ in self.items)

    def as_dict(self) -> dict[int, int]:
        return dict(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, v: int) -> bool:
        return any(u == v for u, _ in self.items)

    def extend(self, x: int, a: int) -> "Pinning":
        if x in self:
            raise SpinModelError(f"vertex {x} already pinned")
        return Pinning(self.items + ((x, a),))

    def union(self, other: "Pinning") -> "Pinning":
        return Pinning(self.items + other.items)

    def key(self, n: int) -> tuple[int, ...]:
        """Encoding used for deterministic tie-breaks: -1 = free."""
        k = [-1] * n
        for v, a in self.items:
            k[v] = a
        return tuple(k)

    def to_io(self) -> dict[str, int]:
        return {str(v): a + 1 for v, a in self.items}


EMPTY = Pinning()


# --------------------------------------------------------------------------
# spin systems


@dataclass(frozen=True, eq=False)
class SpinSystem:
    """General q-spin system with nonnegative symmetric interactions.

    ``edge_matrices[e]`` is the q x q interaction of ``graph.edges[e]``
    (row index = spin of the smaller endpoint).  ``fields`` is ``(n, q)``.
    """

    graph: Graph
    q: int
    edge_matrices: np.ndarray
    fields: np.ndarray
    boundary_matrices: np.ndarray | None = None
    boundary_condition: Mapping[int, int] = field(default_factory=dict)
    kind: str = "general"
    params: Mapping[str, object] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        g, q = self.graph, self.q
        if q < 2:
            raise SpinModelError("q must be >= 2")
        A = np.asarray(self.edge_matrices, dtype=float).reshape(g.m, q, q)
        B = np.asarray(self.fields, dtype=float).reshape(g.n, q)
        if np.any(A < 0) or np.any(B < 0) or not np.all(np.isfinite(A)) or not np.all(np.isfinite(B)):
            raise SpinModelError("interactions and fields must be finite and nonnegative")
        if not np.allclose(A, A.transpose(0, 2, 1), rtol=0, atol=0):
            raise SpinModelError("interaction matrices must be symmetric")
        nb = len(g.boundary_edges)
        if nb:
            if self.boundary_matrices is None:
                raise SpinModelError("boundary edges need interaction matrices")
            Ab = np.asarray(self.boundary_matrices, dtype=float).reshape(nb, q, q)
            if np.any(Ab < 0) or not np.allclose(Ab, Ab.transpose(0, 2, 1)):
                raise SpinModelError("boundary interactions must be symmetric and nonnegative")
            bc = {int(k): int(v) for k, v in self.boundary_condition.items()}
            missing = [b for b in g.boundary_vertices if b not in bc]
            if missing:
                raise SpinModelError(f"no boundary spin for {missing}")
            if any(not 0 <= s < q for s in bc.values()):
                raise SpinModelError("boundary spin out of range")
            eff = B.copy()
            for i, (x, b) in enumerate(g.boundary_edges):
                eff[x] *= Ab[i][:, bc[b]]
        else:
            Ab = np.zeros((0, q, q))
            bc = {}
            eff = B.copy()
        for name, val in (("edge_matrices", A), ("fields", B), ("boundary_matrices", Ab)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "boundary_condition", bc)
        eff.setflags(write=False)
        object.__setattr__(self, "effective_fields", eff)
        with np.errstate(divide="ignore"):
            logA = np.log(A)
            logB = np.log(eff)
        logA.setflags(write=False)
        logB.setflags(write=False)
        object.__setattr__(self, "log_edge", logA)
        object.__setattr__(self, "log_field", logB)
        eu = np.array([u for u, _ in g.edges], dtype=np.intp)
        ev = np.array([v for _, v in g.edges], dtype=np.intp)
        object.__setattr__(self, "_eu", eu)
        object.__setattr__(self, "_ev", ev)
        if q ** g.n <= AUTO_CHECK_STATES:
            if not np.any(np.isfinite(self.log_weights(all_configurations(g.n, q)))):
                raise InfeasibleError("state space is empty")
        elif np.any(np.all(eff == 0, axis=1)):
            raise InfeasibleError("some vertex has no spin with positive field")

    @property
    def n(self) -> int:
        return self.graph.n

    def log_weights(self, states: np.ndarray) -> np.ndarray:
        """Log-weights of a batch ``(N, n)`` of configurations; ``-inf`` if infeasible."""
        s = np.asarray(states)
        if s.ndim == 1:
            s = s[None, :]
        if s.shape[1] != self.n:
            raise SpinModelError(f"configuration length {s.shape[1]} != n = {self.n}")
        if s.size and (s.min() < 0 or s.max() >= self.q):
            raise SpinModelError("spin out of range")
        out = self.log_field[np.arange(self.n)[None, :], s].sum(axis=1)
        if self.graph.m:
            e = np.arange(self.graph.m)[None, :]
            out = out + self.log_edge[e, s[:, self._eu], s[:, self._ev]].sum(axis=1)
        return out

    def log_weight(self, sigma: Sequence[int]) -> float:
        return float(self.log_weights(np.asarray(sigma)[None, :])[0])

    def conditional_logits(self, x: int, sigma: np.ndarray) -> np.ndarray:
        """Unnormalised log-probabilities of the spin at ``x`` given the rest."""
        out = self.log_field[x].copy()
        for e, (u, v) in enumerate(self.graph.edges):
            if u == x:
                out = out + self.log_edge[e][:, sigma[v]]
            elif v == x:
                out = out + self.log_edge[e][:, sigma[u]]
        return out

    def incident_tables(self):
        """Per-vertex padded incident-edge data for vectorised samplers.

        Returns ``(nbr, logA)`` with ``nbr[x, j]`` the j-th neighbour (or 0
        for padding) and ``logA[x, j]`` the ``(q, q)`` log-interaction seen
        from ``x`` (zeros for padding, so padding never contributes).
        """
        g = self.graph
        dmax = max(1, max(g.degree(x) for x in range(g.n)))
        nbr = np.zeros((g.n, dmax), dtype=np.intp)
        la = np.zeros((g.n, dmax, self.q, self.q))
        fill = [0] * g.n
        for e, (u, v) in enumerate(g.edges):
            nbr[u, fill[u]] = v
            la[u, fill[u]] = self.log_edge[e]
            fill[u] += 1
            nbr[v, fill[v]] = u
            la[v, fill[v]] = self.log_edge[e].T
            fill[v] += 1
        return nbr, la


def weight(sys: SpinSystem, sigma: Sequence[int]) -> float:
    """Weight ``w(sigma)``: product of interactions and (boundary-folded) fields."""
    return math.exp(sys.log_weight(sigma))


def all_configurations(n: int, q: int) -> np.ndarray:
    """All of ``[q]^n`` in lexicographic order (vertex 0 most significant)."""
    if n == 0:
        return np.zeros((1, 0), dtype=np.int8)
    grids = np.indices((q,) * n, dtype=np.int8).reshape(n, -1).T
    return np.ascontiguousarray(grids)


def encode(states: np.ndarray, q: int) -> np.ndarray:
    """Lexicographic integer code of each configuration row."""
    s = np.asarray(states, dtype=np.int64)
    n = s.shape[-1]
    powers = q ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return s @ powers


# --------------------------------------------------------------------------
# model constructors


def _ising_potts(graph: Graph, q: int, beta: float, h) -> tuple[np.ndarray, np.ndarray]:
    A = np.exp(beta * np.eye(q))
    if h is None:
        hv = np.zeros(q)
    elif np.isscalar(h):
        hv = np.zeros(q)
        hv[0] = float(h)
    else:
        hv = np.asarray(h, dtype=float)
        if hv.shape != (q,):
            raise SpinModelError(f"field vector must have length {q}")
    return np.broadcast_to(A, (graph.m, q, q)).copy(), np.broadcast_to(np.exp(hv), (graph.n, q)).copy()


def build_model(kind: str, graph: Graph, boundary: Mapping[int, int] | None = None, **params) -> SpinSystem:
    """Construct one of the classical models on ``graph``.

    Kinds: ``ising(beta, h=0)``, ``potts(q, beta, h=0)``, ``hardcore(lam)``,
    ``colorings(q)``, ``general(q, interaction | interactions, fields=None)``.
    ``boundary`` maps boundary vertex ids to 0-indexed spins; boundary edges
    use the same interaction as interior edges (``general``: ``boundary_interaction``).
    A scalar ``h`` is a field on spin 0 (I/O spin 1).
    """
    kind = kind.lower()
    notes: list[str] = []
    if kind == "ising":
        q = 2
        beta = float(params.get("beta", 0.0))
        A, B = _ising_potts(graph, q, beta, params.get("h"))
        shared = np.exp(beta * np.eye(q))
    elif kind == "potts":
        q = int(params["q"])
        if q < 2:
            raise SpinModelError("potts needs q >= 2")
        beta = float(params.get("beta", 0.0))
        A, B = _ising_potts(graph, q, beta, params.get("h"))
        shared = np.exp(beta * np.eye(q))
    elif kind == "hardcore":
        q = 2
        lam = float(params.get("lam", params.get("lambda", 1.0)))
        if not lam > 0:
            raise SpinModelError("hardcore needs lambda > 0")
        shared = np.array([[0.0, 1.0], [1.0, 1.0]])
        A = np.broadcast_to(shared, (graph.m, 2, 2)).copy()
        B = np.broadcast_to(np.array([lam, 1.0]), (graph.n, 2)).copy()
    elif kind == "colorings":
        q = int(params["q"])
        if q < 2:
            raise SpinModelError("colorings needs q >= 2")
        shared = 1.0 - np.eye(q)
        A = np.broadcast_to(shared, (graph.m, q, q)).copy()
        B = np.ones((graph.n, q))
        if q < graph.max_degree + 2:
            notes.append(f"q={q} < Delta+2={graph.max_degree + 2}: total connectedness not guaranteed")
    elif kind == "general":
        q = int(params["q"])
        if "interactions" in params:
            A = np.asarray(params["interactions"], dtype=float).reshape(graph.m, q, q)
            shared = np.asarray(params.get("boundary_interaction", A[0] if graph.m else np.ones((q, q))), dtype=float)
        else:
            shared = np.asarray(params["interaction"], dtype=float).reshape(q, q)
            A = np.broadcast_to(shared, (graph.m, q, q)).copy()
            shared = np.asarray(params.get("boundary_interaction", shared), dtype=float)
        f = params.get("fields")
        B = np.ones((graph.n, q)) if f is None else np.broadcast_to(np.asarray(f, dtype=float), (graph.n, q)).copy()
    else:
        raise SpinModelError(f"unknown model kind {kind!r}")
    nb = len(graph.boundary_edges)
    Ab = np.broadcast_to(shared, (nb, q, q)).copy() if nb else None
    for msg in notes:
        warnings.warn(msg, stacklevel=2)
    clean = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in params.items()}
    return SpinSystem(
        graph=graph,
        q=q,
        edge_matrices=A,
        fields=B,
        boundary_matrices=Ab,
        boundary_condition=dict(boundary or {}),
        kind=kind,
        params=clean,
        warnings=tuple(notes),
    )


# --------------------------------------------------------------------------
# feasibility


def pinning_feasible(sys: SpinSystem, tau: Pinning, cap: int = AUTO_CHECK_STATES) -> tuple[bool, bool]:
    """Return ``(feasible, exact)`` for a pinning.

    Exact when the free part is small enough to enumerate; otherwise only
    local positivity is checked and ``exact`` is False.
    """
    q, n = sys.q, sys.n
    d = tau.as_dict()
    for v, a in d.items():
        if not (0 <= v < n and 0 <= a < q):
            raise SpinModelError(f"pin ({v}, {a}) out of range")
    free = [v for v in range(n) if v not in d]
    if q ** len(free) <= cap:
        from .gibbs import enumerate_states

        try:
            enumerate_states(sys, tau)
        except InfeasibleError:
            return False, True
        return True, True
    for v, a in d.items():
        if sys.effective_fields[v, a] <= 0:
            return False, False
    for e, (u, v) in enumerate(sys.graph.edges):
        if u in d and v in d and sys.edge_matrices[e, d[u], d[v]] <= 0:
            return False, False
    return True, False


@dataclass
class ConnectivityResult:
    connected: bool
    sampled: bool
    pinnings_checked: int
    witness: Pinning | None = None

    def __bool__(self) -> bool:
        return self.connected


def is_totally_connected(
    sys: SpinSystem,
    cap: int = 1 << 24,
    max_pinnings: int | None = 20000,
    rng: np.random.Generator | None = None,
) -> ConnectivityResult:
    """Check that every pinned state space is connected under single-site moves.

    Exhaustive over all pinnings when their number is at most
    ``max_pinnings``; otherwise checks a random sample and flags the result.
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    from .gibbs import enumerate_table, iter_pinnings, count_pinnings

    if sys.q ** sys.n > cap:
        raise CapExceeded(f"q^n = {sys.q ** sys.n} exceeds cap {cap}")
    table = enumerate_table(sys, cap=cap)
    states = table.states
    n, q = sys.n, sys.q
    # Hamming-1 neighbours share the code with digit v removed
    codes = encode(states, q)
    adj_rows, adj_cols = [], []
    for v in range(n):
        p = q ** (n - 1 - v)
        key = codes - states[:, v].astype(np.int64) * p
        order = np.argsort(key, kind="stable")
        ks = key[order]
        same = ks[1:] == ks[:-1]
        adj_rows.append(order[:-1][same])
        adj_cols.append(order[1:][same])
    rows = np.concatenate(adj_rows) if adj_rows else np.zeros(0, np.intp)
    cols = np.concatenate(adj_cols) if adj_cols else np.zeros(0, np.intp)

    total = count_pinnings(table)
    sampled = max_pinnings is not None and total > max_pinnings
    if sampled:
        from .gibbs import sample_pinnings

        pins = sample_pinnings(table, max_pinnings, rng or np.random.default_rng(0))
    else:
        pins = iter_pinnings(table)
    checked = 0
    for tau, idx in pins:
        checked += 1
        if len(idx) <= 1:
            continue
        mask = np.zeros(len(states), dtype=bool)
        mask[idx] = True
        keep = mask[rows] & mask[cols]
        pos = -np.ones(len(states), dtype=np.intp)
        pos[idx] = np.arange(len(idx))
        g = coo_matrix((np.ones(keep.sum()), (pos[rows[keep]], pos[cols[keep]])), shape=(len(idx), len(idx)))
        ncomp, _ = connected_components(g, directed=False)
        if ncomp != 1:
            return ConnectivityResult(False, sampled, checked, tau)
    return ConnectivityResult(True, sampled, checked)


def all_pinnings_of(n: int, q: int) -> Iterable[Pinning]:
    """Every assignment on every subset (feasibility not checked)."""
    for choice in itertools.product(range(-1, q), repeat=n):
        yield Pinning(tuple((v, a) for v, a in enumerate(choice) if a >= 0))
