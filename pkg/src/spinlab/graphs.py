"""Graph generators and the plain-text graph / JSON model file formats.

Graph file::

    n m k_boundary
    u v            (m interior edges, 0-indexed)
    u spin         (k_boundary lines: interior vertex u sees a boundary
                    neighbour fixed to ``spin`` in 1..q)

Each boundary line creates its own boundary vertex ``n + i``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import Graph, SpinModelError, SpinSystem, build_model


def path(n: int) -> Graph:
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)))


def cycle(n: int) -> Graph:
    if n < 3:
        raise SpinModelError("cycle needs n >= 3")
    return Graph(n, tuple((i, (i + 1) % n) for i in range(n)))


def complete(n: int) -> Graph:
    return Graph(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))


def complete_bipartite(a: int, b: int) -> Graph:
    return Graph(a + b, tuple((i, a + j) for i in range(a) for j in range(b)))


def grid(rows: int, cols: int) -> Graph:
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return Graph(rows * cols, tuple(edges))


def random_regular(n: int, d: int, seed: int = 0, max_tries: int = 1000) -> Graph:
    """Uniform-ish random ``d``-regular simple graph by rejection of pairings."""
    if n * d % 2 or d >= n:
        raise SpinModelError(f"no simple {d}-regular graph on {n} vertices")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        stubs = rng.permutation(np.repeat(np.arange(n), d))
        pairs = stubs.reshape(-1, 2)
        edges = {(int(min(u, v)), int(max(u, v))) for u, v in pairs}
        if len(edges) == len(pairs) and all(u != v for u, v in edges):
            return Graph(n, tuple(sorted(edges)))
    raise SpinModelError("failed to generate a simple regular graph")


def remove_edge(g: Graph, u: int, v: int) -> Graph:
    e = (min(u, v), max(u, v))
    if e not in g.edges:
        raise SpinModelError(f"edge {e} not present")
    return Graph(g.n, tuple(x for x in g.edges if x != e))


FAMILIES = {
    "path": (path, 1),
    "cycle": (cycle, 1),
    "complete": (complete, 1),
    "complete-bipartite": (complete_bipartite, 2),
    "grid": (grid, 2),
    "random-regular": (random_regular, 3),
}


def generate(family: str, params) -> Graph:
    """Build a graph from a family name and integer parameters.

    ``random-regular`` takes ``n d seed``; ``grid`` takes ``rows cols``.
    """
    if family not in FAMILIES:
        raise SpinModelError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}")
    fn, arity = FAMILIES[family]
    vals = [int(p) for p in params]
    if family == "random-regular" and len(vals) == 2:
        vals.append(0)
    if len(vals) != arity:
        raise SpinModelError(f"{family} takes {arity} integer parameters")
    return fn(*vals)


def write_graph(g: Graph, path_, boundary: dict[int, int] | None = None) -> None:
    """Write ``g``; ``boundary`` maps boundary vertex id to 0-indexed spin."""
    lines = [f"{g.n} {g.m} {len(g.boundary_edges)}"]
    lines += [f"{u} {v}" for u, v in g.edges]
    for x, b in g.boundary_edges:
        if boundary is None or b not in boundary:
            raise SpinModelError("boundary spins required to write boundary edges")
        lines.append(f"{x} {boundary[b] + 1}")
    Path(path_).write_text("\n".join(lines) + "\n")


def read_graph(path_) -> tuple[Graph, dict[int, int]]:
    """Parse a graph file; returns the graph and boundary spins (0-indexed)."""
    rows = [ln.split() for ln in Path(path_).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows:
        raise SpinModelError("empty graph file")
    try:
        n, m, k = (int(t) for t in rows[0][:3])
        edges = [(int(a), int(b)) for a, b in rows[1 : 1 + m]]
        bl = [(int(a), int(b)) for a, b in rows[1 + m : 1 + m + k]]
    except ValueError as exc:
        raise SpinModelError(f"malformed graph file: {exc}") from exc
    if len(edges) != m or len(bl) != k:
        raise SpinModelError("graph file shorter than its header")
    bverts = tuple(n + i for i in range(k))
    bedges = tuple((x, n + i) for i, (x, _) in enumerate(bl))
    boundary = {n + i: s - 1 for i, (_, s) in enumerate(bl)}
    return Graph(n, tuple(edges), bverts, bedges), boundary


def load_model(spec: dict | str | Path, base: Path | None = None) -> SpinSystem:
    """Build a system from a model JSON object ``{kind, params, graph_path, boundary}``.

    ``graph_path`` may be replaced by ``graph: {family, params}``.  Explicit
    ``boundary`` entries (vertex id -> spin in 1..q) override the file's.
    """
    if not isinstance(spec, dict):
        p = Path(spec)
        base = p.parent
        spec = json.loads(p.read_text())
    if "graph_path" in spec:
        gp = Path(spec["graph_path"])
        if not gp.is_absolute() and base is not None:
            gp = base / gp
        graph, boundary = read_graph(gp)
    elif "graph" in spec:
        graph, boundary = generate(spec["graph"]["family"], spec["graph"]["params"]), {}
    else:
        raise SpinModelError("model needs graph_path or graph")
    for k, v in (spec.get("boundary") or {}).items():
        boundary[int(k)] = int(v) - 1
    return build_model(spec["kind"], graph, boundary=boundary or None, **spec.get("params", {}))
