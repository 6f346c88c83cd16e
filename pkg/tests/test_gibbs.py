import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinlab import graphs
from spinlab.gibbs import (
    GibbsTable,
    count_pinnings,
    dobrushin_matrix,
    enumerate_table,
    influence_matrix,
    iter_pinnings,
    lambda1,
    marginal_bound,
    sample_pinnings,
    spectral_independence,
    spectral_radius,
)
from spinlab.model import EMPTY, CapExceeded, InfeasibleError, Pinning, build_model

# Frozen values for Ising beta=0.3 on the 4-cycle, computed by the brute-force
# oracle below and by closed forms.
C4_ETA = 0.34853291246591167
C4_B = 0.3543436937742045


def brute_gibbs(sys_):
    """Plain-dict Gibbs measure from the explicit weight formula."""
    out = {}
    for s in itertools.product(range(sys_.q), repeat=sys_.n):
        w = sys_.fields[np.arange(sys_.n), list(s)].prod()
        for e, (u, v) in enumerate(sys_.graph.edges):
            w *= sys_.edge_matrices[e][s[u], s[v]]
        if w > 0:
            out[s] = w
    Z = sum(out.values())
    return {s: w / Z for s, w in out.items()}


def brute_eta(sys_):
    """max over pinnings of the top eigenvalue of the conditional-shift matrix."""
    mu = brute_gibbs(sys_)
    n, q = sys_.n, sys_.q
    best = 0.0
    for tau in itertools.product(range(-1, q), repeat=n):
        cond = {s: p for s, p in mu.items() if all(t < 0 or s[i] == t for i, t in enumerate(tau))}
        Z = sum(cond.values())
        if Z == 0:
            continue
        free = [i for i in range(n) if tau[i] < 0]
        if len(free) < 2:
            continue
        marg = {(x, a): sum(p for s, p in cond.items() if s[x] == a) / Z for x in free for a in range(q)}
        idx = [k for k, v in marg.items() if v > 0]
        J = np.zeros((len(idx), len(idx)))
        for i, (x, a) in enumerate(idx):
            for j, (y, b) in enumerate(idx):
                if x == y:
                    continue
                joint = sum(p for s, p in cond.items() if s[x] == a and s[y] == b) / Z
                J[i, j] = joint / marg[(x, a)] - marg[(y, b)]
        best = max(best, float(np.linalg.eigvals(J).real.max()))
    return best


@pytest.mark.parametrize("n", [3, 4, 5, 8])
@pytest.mark.parametrize("beta", [-0.7, 0.0, 0.3, 1.1])
def test_ising_cycle_log_partition_transfer_matrix(n, beta):
    # eigenvalues of [[e^b, 1], [1, e^b]] are e^b + 1 and e^b - 1
    expected = math.log((math.exp(beta) + 1) ** n + (math.exp(beta) - 1) ** n)
    T = enumerate_table(build_model("ising", graphs.cycle(n), beta=beta))
    assert T.log_partition == pytest.approx(expected, abs=1e-12)
    assert math.fsum(T.probs.tolist()) == pytest.approx(1.0, abs=1e-14)


def test_frozen_c4_log_partition(ising_c4_table):
    assert ising_c4_table.log_partition == pytest.approx(3.417912222142953, abs=1e-12)


@pytest.mark.parametrize("n,q", [(4, 3), (5, 3), (5, 4), (6, 3)])
def test_coloring_cycle_count(n, q):
    # chromatic polynomial of C_n
    count = (q - 1) ** n + (-1) ** n * (q - 1)
    T = enumerate_table(build_model("colorings", graphs.cycle(n), q=q))
    assert T.N == count
    assert np.allclose(T.probs, 1.0 / count)


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.5])
def test_hardcore_path_independence_polynomial(lam):
    # occupied/unoccupied transfer along a path
    n = 6
    occ, free = lam, 1.0
    for _ in range(n - 1):
        occ, free = free * lam, occ + free
    T = enumerate_table(build_model("hardcore", graphs.path(n), lam=lam))
    assert T.log_partition == pytest.approx(math.log(occ + free), abs=1e-12)


def test_states_are_lexicographic(potts_p3):
    T = enumerate_table(potts_p3)
    codes = T.states.astype(int) @ (3 ** np.arange(2, -1, -1))
    assert np.all(np.diff(codes) > 0)
    assert np.array_equal(T.index_of(T.states), np.arange(T.N))
    assert T.index_of(np.array([[0, 0, 5]]))[0] == -1


def test_restrict_matches_conditioning(potts_p3):
    T = enumerate_table(potts_p3)
    tau = Pinning(((1, 2),))
    R = T.restrict(tau)
    direct = enumerate_table(potts_p3, tau)
    assert np.array_equal(R.states, direct.states)
    assert np.allclose(R.probs, direct.probs, atol=1e-15)
    assert R.free == (0, 2)


def test_infeasible_pinning_and_cap():
    sys_ = build_model("colorings", graphs.complete(3), q=3)
    with pytest.raises(InfeasibleError):
        enumerate_table(sys_, Pinning(((0, 0), (1, 0))))
    with pytest.raises(CapExceeded):
        enumerate_table(build_model("ising", graphs.path(12)), cap=100)


def test_block_fibers_group_states_off_block(ising_c4_table):
    fb = ising_c4_table.block_fibers([1, 2])
    for idx in fb.members():
        rest = ising_c4_table.states[idx][:, [0, 3]]
        assert (rest == rest[0]).all()
        assert len(idx) == 4


def test_iter_pinnings_counts_and_order(ising_c4_table):
    pins = list(iter_pinnings(ising_c4_table))
    assert pins[0][0] == EMPTY
    assert len(pins) == 3**4 == count_pinnings(ising_c4_table)
    sampled = list(sample_pinnings(ising_c4_table, 7, np.random.default_rng(0)))
    assert sampled[0][0] == EMPTY and len(sampled) == 7


def test_spectral_independence_matches_brute_force(ising_c4):
    eta = spectral_independence(ising_c4)
    assert not eta.sampled
    assert eta.value == pytest.approx(brute_eta(ising_c4), abs=1e-12)
    assert eta.value == pytest.approx(C4_ETA, abs=1e-12)


@pytest.mark.parametrize(
    "sys_",
    [
        build_model("potts", graphs.path(3), q=3, beta=0.5),
        build_model("hardcore", graphs.cycle(4), lam=1.3),
        build_model("colorings", graphs.path(3), q=3),
    ],
    ids=["potts", "hardcore", "colorings"],
)
def test_spectral_independence_brute_force_other_models(sys_):
    assert spectral_independence(sys_).value == pytest.approx(brute_eta(sys_), abs=1e-10)


def test_marginal_bound_closed_form(ising_c4):
    beta = 0.3
    b = marginal_bound(ising_c4)
    # both neighbours pinned to the same spin, x takes the other spin
    assert b.value == pytest.approx(1 / (1 + math.exp(2 * beta)), abs=1e-14)
    assert b.value == pytest.approx(C4_B, abs=1e-14)


def test_influence_matrix_diagonal_zero_and_rows(ising_c4_table):
    J = influence_matrix(ising_c4_table)
    for i, (x, _) in enumerate(J.index):
        for j, (y, _) in enumerate(J.index):
            if x == y:
                assert J.entries[i, j] == 0.0
    # rows sum to zero over each target vertex's spins
    for i in range(len(J.index)):
        for y in range(4):
            cols = [j for j, (v, _) in enumerate(J.index) if v == y]
            assert abs(J.entries[i, cols].sum()) < 1e-14


@st.composite
def random_general(draw):
    q = draw(st.integers(2, 3))
    n = draw(st.integers(2, 4))
    vals = draw(st.lists(st.floats(0.1, 3.0), min_size=q * q, max_size=q * q))
    A = np.array(vals).reshape(q, q)
    A = (A + A.T) / 2
    f = np.array(draw(st.lists(st.floats(0.2, 2.0), min_size=q, max_size=q)))
    return build_model("general", graphs.path(n), q=q, interaction=A.tolist(), fields=f.tolist())


@given(random_general())
@settings(max_examples=40, deadline=None)
def test_influence_self_adjoint_in_marginal_inner_product(sys_):
    T = enumerate_table(sys_)
    J = influence_matrix(T)
    m = np.array([T.marginals[x, a] for x, a in J.index])
    W = m[:, None] * J.entries
    assert np.abs(W - W.T).max() < 1e-12
    ev = np.linalg.eigvals(J.entries).real.max()
    assert lambda1(J) == pytest.approx(ev, abs=1e-9)


def test_dobrushin_matrix_closed_form(ising_c4):
    R = dobrushin_matrix(ising_c4)
    t = math.tanh(0.3) / 2
    expected = np.array([[0, t, 0, t], [t, 0, t, 0], [0, t, 0, t], [t, 0, t, 0]])
    assert np.allclose(R, expected, atol=1e-14)
    sr = spectral_radius(R)
    assert sr.value == pytest.approx(2 * t, abs=1e-9)
    assert sr.upper >= 2 * t


def test_dobrushin_pinned_neighbour_drops_out(ising_c4):
    R = dobrushin_matrix(ising_c4, Pinning(((0, 0),)))
    assert np.all(R[0] == 0) and np.all(R[:, 0] == 0)


@given(st.integers(1, 6), st.integers(0, 2**31))
@settings(max_examples=40, deadline=None)
def test_spectral_radius_bracket(n, seed):
    rng = np.random.default_rng(seed)
    R = rng.uniform(0, 1, size=(n, n)) * (rng.uniform(size=(n, n)) < 0.6)
    rho = float(np.abs(np.linalg.eigvals(R)).max())
    sr = spectral_radius(R)
    assert sr.upper >= rho - 1e-12
    assert sr.value == pytest.approx(rho, abs=1e-6)


def test_dump_roundtrip(tmp_path, ising_c4_table):
    path = tmp_path / "t.bin"
    ising_c4_table.dump(path)
    n, q, logZ, codes, probs = GibbsTable.load_dump(path)
    assert (n, q) == (4, 2)
    assert logZ == ising_c4_table.log_partition
    assert np.array_equal(codes, ising_c4_table.codes)
    assert np.array_equal(probs, ising_c4_table.probs)
