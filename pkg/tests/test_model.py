import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinlab import graphs
from spinlab.model import (
    EMPTY,
    Graph,
    Partition,
    Pinning,
    SpinModelError,
    build_model,
    greedy_partition,
    weight,
)


def test_graph_rejects_self_loops():
    with pytest.raises(SpinModelError):
        Graph(3, ((0, 0),))


def test_graph_degrees_and_neighbours():
    g = graphs.grid(2, 3)
    assert g.n == 6 and g.m == 7
    assert g.max_degree == 3
    assert sorted(g.neighbors(1)) == [0, 2, 4]
    assert g.has_edge(4, 1) and not g.has_edge(0, 5)


def test_remove_edge():
    g = graphs.remove_edge(graphs.complete(4), 0, 1)
    assert g.m == 5 and not g.has_edge(0, 1)
    with pytest.raises(SpinModelError):
        graphs.remove_edge(g, 0, 1)


@pytest.mark.parametrize(
    "kind,params",
    [("ising", {"beta": 0.3}), ("potts", {"q": 3, "beta": -0.2}), ("hardcore", {"lam": 2.0}), ("colorings", {"q": 4})],
)
def test_weight_matches_edge_product(kind, params):
    g = graphs.cycle(4)
    sys_ = build_model(kind, g, **params)
    q = sys_.q
    for sigma in itertools.product(range(q), repeat=g.n):
        if kind in ("ising", "potts"):
            w = math.exp(params["beta"] * sum(sigma[u] == sigma[v] for u, v in g.edges))
        elif kind == "hardcore":
            occupied = [s == 0 for s in sigma]
            bad = any(occupied[u] and occupied[v] for u, v in g.edges)
            w = 0.0 if bad else params["lam"] ** sum(occupied)
        else:
            w = float(all(sigma[u] != sigma[v] for u, v in g.edges))
        assert weight(sys_, sigma) == pytest.approx(w, rel=1e-12)


def test_unknown_kind_and_bad_params():
    g = graphs.path(3)
    with pytest.raises(SpinModelError):
        build_model("heisenberg", g)
    with pytest.raises(SpinModelError):
        build_model("hardcore", g, lam=0.0)
    with pytest.raises(SpinModelError):
        build_model("general", g, q=2, interaction=[[1.0, 2.0], [0.5, 1.0]])


def test_colorings_warns_below_delta_plus_two():
    with pytest.warns(UserWarning):
        build_model("colorings", graphs.complete(4), q=4)


def test_boundary_requires_spin():
    g = Graph(2, ((0, 1),), (2,), ((0, 2),))
    with pytest.raises(SpinModelError):
        build_model("ising", g, beta=0.1)
    s = build_model("ising", g, beta=0.1, boundary={2: 0})
    # vertex 0 sees a boundary neighbour with spin 0
    w00 = weight(s, (0, 0))
    w11 = weight(s, (1, 1))
    assert w00 / w11 == pytest.approx(math.exp(0.1))


def test_pinning_normalises_and_rejects_conflicts():
    p = Pinning(((2, 1), (0, 0)))
    assert p.items == ((0, 0), (2, 1))
    assert 2 in p and 1 not in p
    assert p.to_io() == {"0": 1, "2": 2}
    assert p.key(3) == (0, -1, 1)
    with pytest.raises(SpinModelError):
        Pinning(((0, 0), (0, 1)))
    with pytest.raises(SpinModelError):
        p.extend(0, 1)
    assert len(EMPTY) == 0


@st.composite
def small_graphs(draw):
    n = draw(st.integers(2, 7))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    keep = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return Graph(n, tuple(e for e, k in zip(pairs, keep) if k))


@given(small_graphs())
@settings(max_examples=60, deadline=None)
def test_greedy_partition_is_proper(g):
    part = greedy_partition(g)
    part.validate(g)
    seen = sorted(v for c in part.classes for v in c)
    assert seen == list(range(g.n))
    assert part.k <= g.max_degree + 1
    for c in part.classes:
        for u, v in itertools.combinations(c, 2):
            assert not g.has_edge(u, v)


def test_partition_validate_rejects_edges():
    with pytest.raises(SpinModelError):
        Partition(((0, 1), (2,))).validate(graphs.path(3))


def test_graph_file_roundtrip(tmp_path):
    g = Graph(3, ((0, 1), (1, 2)), (3,), ((2, 3),))
    path = tmp_path / "g.txt"
    graphs.write_graph(g, path, boundary={3: 1})
    g2, bnd = graphs.read_graph(path)
    assert g2.edges == g.edges and g2.boundary_edges == g.boundary_edges
    assert bnd == {3: 1}


def test_random_regular_is_regular():
    g = graphs.random_regular(8, 3, seed=4)
    assert all(g.degree(v) == 3 for v in range(8))
    with pytest.raises(SpinModelError):
        graphs.random_regular(5, 3)


def test_load_model_from_family():
    s = graphs.load_model({"kind": "potts", "params": {"q": 3, "beta": 0.2}, "graph": {"family": "cycle", "params": [5]}})
    assert s.n == 5 and s.q == 3
    assert np.allclose(s.edge_matrices[0], np.exp(0.2 * np.eye(3)))
