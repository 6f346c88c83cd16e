import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinlab import dynamics as dyn
from spinlab import graphs
from spinlab.gibbs import enumerate_table
from spinlab.harness import DEFAULT_FLIP, empirical_row
from spinlab.model import Pinning, SpinModelError, build_model, weight


def heat_bath_oracle(sys_, table):
    """Glauber matrix from single-site conditionals of the raw weights."""
    N, n, q = table.N, sys_.n, sys_.q
    P = np.zeros((N, N))
    for i, s in enumerate(table.states):
        for x in range(n):
            ws = []
            for a in range(q):
                t = s.copy()
                t[x] = a
                ws.append(weight(sys_, t))
            ws = np.array(ws) / sum(ws)
            for a in range(q):
                if ws[a] > 0:
                    t = s.copy()
                    t[x] = a
                    P[i, table.index_of(t)[0]] += ws[a] / n
    return P


@pytest.mark.parametrize(
    "sys_",
    [
        build_model("ising", graphs.cycle(4), beta=0.3),
        build_model("potts", graphs.path(3), q=3, beta=-0.5),
        build_model("hardcore", graphs.cycle(5), lam=1.7),
        build_model("colorings", graphs.complete(3), q=5),
    ],
    ids=["ising", "potts", "hardcore", "colorings"],
)
def test_glauber_matches_heat_bath_oracle(sys_):
    T = enumerate_table(sys_)
    P = dyn.glauber(sys_).dense(T)
    assert np.allclose(P, heat_bath_oracle(sys_, T), atol=1e-14)


def test_singleton_block_dynamics_is_glauber(potts_p3):
    T = enumerate_table(potts_p3)
    P1 = dyn.glauber(potts_p3).dense(T)
    P2 = dyn.block_dynamics(potts_p3, dyn.singletons(3)).dense(T)
    assert np.allclose(P1, P2, atol=1e-15)


def test_full_block_resamples_from_mu(potts_p3):
    T = enumerate_table(potts_p3)
    alpha = dyn.BlockWeights((frozenset(range(3)),), (1.0,))
    P = dyn.block_dynamics(potts_p3, alpha).dense(T)
    assert np.allclose(P, np.tile(T.probs, (T.N, 1)), atol=1e-15)


@given(st.integers(0, 2**31))
@settings(max_examples=25, deadline=None)
def test_random_block_dynamics_reversible(seed):
    rng = np.random.default_rng(seed)
    sys_ = build_model("potts", graphs.cycle(4), q=3, beta=float(rng.uniform(-1, 1)))
    T = enumerate_table(sys_)
    alpha = dyn.random_block_weights(4, rng)
    assert alpha.covers(4)
    P = dyn.block_dynamics(sys_, alpha).dense(T)
    F = T.probs[:, None] * P
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-13)
    assert np.abs(T.probs @ P - T.probs).max() < 1e-13
    assert np.abs(F - F.T).max() < 1e-13
    f = rng.standard_normal(T.N)
    K = dyn.block_dynamics(sys_, alpha)
    assert np.allclose(K.apply(T, f), P @ f, atol=1e-12)


def test_block_weight_validation():
    with pytest.raises(SpinModelError):
        dyn.BlockWeights((frozenset({0}),), (0.5,))
    with pytest.raises(SpinModelError):
        dyn.BlockWeights((frozenset(),), (1.0,))
    with pytest.raises(SpinModelError):
        dyn.BlockWeights((frozenset({0}), frozenset({1})), (1.0, 0.0))
    assert dyn.coverage_delta(dyn.singletons(5), 5) == pytest.approx(0.2)
    assert dyn.coverage_delta(dyn.uniform_subsets(4, 2), 4) == pytest.approx(0.5)
    balls = dyn.ball_blocks(graphs.path(3), 1)
    assert balls.blocks[1] == frozenset({0, 1, 2})


def test_pinned_glauber_freezes_pinned_vertices(ising_c4):
    tau = Pinning(((2, 1),))
    T = enumerate_table(ising_c4, tau)
    K = dyn.glauber(ising_c4, tau)
    P = K.dense(T)
    assert np.abs(T.probs @ P - T.probs).max() < 1e-14
    S = np.repeat(T.states[:1], 500, axis=0)
    out = K.step(S, np.random.default_rng(0))
    assert np.all(out[:, 2] == 1)


def test_kernel_rejects_foreign_table(ising_c4, potts_p3):
    with pytest.raises(SpinModelError):
        dyn.glauber(ising_c4).matrix(enumerate_table(potts_p3))


def test_flip_dynamics_symmetric_on_colorings(coloring_k4):
    T = enumerate_table(coloring_k4)
    P = dyn.flip_dynamics(coloring_k4, DEFAULT_FLIP).dense(T)
    # uniform stationary measure: reversibility means symmetry
    assert np.allclose(P, P.T, atol=1e-14)
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-14)


def test_flip_with_only_single_flips_is_metropolis_recolouring():
    sys_ = build_model("colorings", graphs.cycle(4), q=4)
    T = enumerate_table(sys_)
    P = dyn.flip_dynamics(sys_, dyn.FlipParams((1.0,))).dense(T)
    n, q = 4, 4
    for i, s in enumerate(T.states):
        for x in range(n):
            for a in range(q):
                if a == s[x]:
                    continue
                t = s.copy()
                t[x] = a
                j = T.index_of(t)[0]
                if j >= 0:
                    assert P[i, j] == pytest.approx(1.0 / (n * q))


def test_flip_select_update_form_agrees(coloring_k4):
    T = enumerate_table(coloring_k4)
    P1 = dyn.flip_dynamics(coloring_k4, DEFAULT_FLIP).dense(T)
    P2 = dyn.flip_as_select_update(coloring_k4, DEFAULT_FLIP).dense(T)
    assert np.allclose(P1, P2, atol=1e-14)


def test_flip_params_load(tmp_path):
    path = tmp_path / "flip.json"
    path.write_text(json.dumps({"p": [1, 0.5], "source": "test"}))
    fp = dyn.FlipParams.load(path)
    assert fp.p == (1.0, 0.5) and fp.prob(3) == 0.0 and fp.max_size == 2
    with pytest.raises(SpinModelError):
        dyn.FlipParams((1.5,))


@pytest.mark.parametrize("q,beta", [(2, 0.4), (3, 0.2), (3, 1.0)])
def test_swendsen_wang_composition_equals_direct(q, beta):
    sys_ = build_model("potts", graphs.remove_edge(graphs.complete(4), 0, 1), q=q, beta=beta)
    T = enumerate_table(sys_)
    P = dyn.swendsen_wang(sys_).dense(T)
    assert np.abs(P - dyn.sw_matrix_direct(T)).max() < 1e-12
    F = T.probs[:, None] * P
    assert np.abs(F - F.T).max() < 1e-12


def test_swendsen_wang_at_infinite_temperature_is_uniform():
    sys_ = build_model("potts", graphs.path(3), q=3, beta=0.0)
    T = enumerate_table(sys_)
    assert np.allclose(dyn.swendsen_wang(sys_).dense(T), 1.0 / 27)


def test_swendsen_wang_rejects_fields_and_antiferro():
    with pytest.raises(SpinModelError):
        dyn.swendsen_wang(build_model("ising", graphs.path(3), beta=-0.1))
    with pytest.raises(SpinModelError):
        dyn.swendsen_wang(build_model("ising", graphs.path(3), beta=0.1, h=0.3))
    with pytest.raises(SpinModelError):
        dyn.swendsen_wang(build_model("hardcore", graphs.path(3), lam=1.0))


@pytest.mark.parametrize("which", ["glauber", "sw", "flip", "block"])
def test_sampler_one_step_law(which):
    if which == "flip":
        sys_ = build_model("colorings", graphs.cycle(4), q=4)
        K = dyn.flip_dynamics(sys_, DEFAULT_FLIP)
    else:
        sys_ = build_model("potts", graphs.cycle(4), q=3, beta=0.5)
        K = {"glauber": dyn.glauber, "sw": dyn.swendsen_wang}.get(which, lambda s: dyn.block_dynamics(s, dyn.ball_blocks(s.graph, 1)))(sys_)
    T = enumerate_table(sys_)
    steps = 200_000
    row = K.dense(T)[3]
    emp = empirical_row(K, T, T.states[3], steps, np.random.default_rng(7))
    sd = np.sqrt(row * (1 - row) / steps)
    assert np.all(np.abs(emp - row) <= 5 * sd + 1e-12)
