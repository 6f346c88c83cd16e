import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from spinlab import contraction as ctr
from spinlab import dynamics as dyn
from spinlab import graphs
from spinlab.gibbs import dobrushin_matrix, enumerate_table, influence_matrix, spectral_independence
from spinlab.harness import DEFAULT_FLIP
from spinlab.model import Pinning, build_model
from spinlab.transport import hamming, weighted_hamming


def w1_lp(a, b, C):
    m, n = C.shape
    A = np.zeros((m + n, m * n))
    for r in range(m):
        A[r, r * n : (r + 1) * n] = 1
    for c in range(n):
        A[m + c, c::n] = 1
    return linprog(C.ravel(), A_eq=A, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs").fun


def kappa_oracle(P, D):
    best = 0.0
    for i, j in itertools.combinations(range(len(P)), 2):
        best = max(best, w1_lp(P[i], P[j], D) / D[i, j])
    return best


def test_infinite_temperature_glauber_rate():
    sys_ = build_model("ising", graphs.path(4), beta=0.0)
    T = enumerate_table(sys_)
    rep = ctr.measure_kappa(dyn.glauber(sys_), T, hamming())
    assert rep.kappa == pytest.approx(1 - 1 / 4, abs=1e-12)


@pytest.mark.parametrize("beta", [0.2, 0.8])
def test_kappa_matches_lp_oracle(beta):
    sys_ = build_model("ising", graphs.path(3), beta=beta)
    T = enumerate_table(sys_)
    K = dyn.glauber(sys_)
    w = weighted_hamming([1.0, 1.7, 0.6])
    for metric in (hamming(), w):
        rep = ctr.measure_kappa(K, T, metric)
        assert rep.kappa == pytest.approx(kappa_oracle(K.dense(T), metric.restricted(T.states)), abs=1e-10)
    adj = ctr.measure_kappa(K, T, hamming(), "adjacent_pairs")
    # path coupling: adjacent pairs suffice under Hamming
    assert adj.kappa == pytest.approx(ctr.measure_kappa(K, T, hamming()).kappa, abs=1e-12)


def test_frozen_cycle_kappa(ising_c4, ising_c4_table):
    rep = ctr.measure_kappa(dyn.glauber(ising_c4), ising_c4_table, hamming())
    assert rep.kappa == pytest.approx(0.8228, abs=1e-4)


def test_all_pairs_cap():
    sys_ = build_model("ising", graphs.path(4), beta=0.1)
    with pytest.raises(ValueError):
        ctr.measure_kappa(dyn.glauber(sys_), enumerate_table(sys_), hamming(), max_states=10)


def test_pinned_contraction_maximum(ising_c4, ising_c4_table):
    pc = ctr.measure_kappa_pinned(lambda tau: dyn.glauber(ising_c4, tau), ising_c4_table, hamming())
    assert len(pc.per_pinning) == 81
    assert pc.kappa == max(pc.per_pinning.values())
    assert pc.per_pinning[pc.witness.items] == pc.kappa


def test_predicted_eta_examples():
    n, eps = 5, 0.4
    kappa = 1 - eps / n
    assert ctr.predicted_eta("glauber_weighted", kappa, n=n) == pytest.approx(2 / eps)
    assert ctr.predicted_eta("glauber_gamma", kappa, n=n, gamma=2.0) == pytest.approx(8 / eps)
    assert ctr.predicted_eta("general", 0.5, gamma=1.0, D=0.25, M=2) == pytest.approx(2.0)
    assert ctr.predicted_eta("locality", 0.5, gamma=1.5, Phi=0.1) == pytest.approx(0.9)
    with pytest.raises(ValueError):
        ctr.predicted_eta("glauber_weighted", 1.0, n=3)
    with pytest.raises(ValueError):
        ctr.predicted_eta("nonsense", 0.5, n=3)
    assert ctr.remark_eta({2: 0.5, 4: 0.75}) == pytest.approx(2.0)


def test_contraction_bounds_spectral_independence(ising_c4, ising_c4_table):
    pc = ctr.measure_kappa_pinned(lambda tau: dyn.glauber(ising_c4, tau), ising_c4_table, hamming())
    eta = spectral_independence(ising_c4_table).value
    assert pc.kappa < 1
    assert eta <= ctr.predicted_eta("glauber_weighted", pc.kappa, n=4) + 1e-8


@pytest.mark.parametrize("x,a", [(0, 0), (2, 1)])
def test_glauber_locality_at_most_one_over_n(ising_c4, ising_c4_table, x, a):
    phi = ctr.measure_locality_phi(lambda tau: dyn.glauber(ising_c4, tau), ising_c4_table, x, a)
    assert phi <= 1 / 4 + 1e-12


def test_flip_locality_bounded_by_selection(coloring_k4):
    T = enumerate_table(coloring_k4)
    D = dyn.flip_selection_D(coloring_k4, DEFAULT_FLIP, T.states)
    M = DEFAULT_FLIP.max_size
    for x, a in [(0, 0), (3, 2)]:
        phi = ctr.measure_locality_phi(lambda tau: dyn.flip_dynamics(coloring_k4, DEFAULT_FLIP, tau), T, x, a)
        assert phi <= D * M + 1e-12


def test_stein_bound_and_sign_function():
    sys_ = build_model("ising", graphs.complete(3), beta=0.2)
    T = enumerate_table(sys_)
    J = influence_matrix(T)
    P = dyn.glauber(sys_)
    rng = np.random.default_rng(3)
    for x, a in J.index:
        sub = T.restrict(Pinning(((x, a),)))
        setup = ctr.stein_setup(P, T, dyn.glauber(sys_, sub.pinning), sub, hamming())
        res = ctr.verify_stein_bound(setup, rng.standard_normal((T.N, 50)))
        assert res.holds
        f = ctr.sign_function(J, T, x, a)
        rs = ctr.verify_stein_bound(setup, f)
        row = J.index.index((x, a))
        assert rs.lhs[0] == pytest.approx(np.abs(J.entries[row]).sum(), abs=1e-13)
        assert rs.holds


def test_dobrushin_weights():
    R = np.array([[0.0, 0.5], [0.2, 0.0]])
    rho = np.sqrt(0.1)
    w, slack = ctr.dobrushin_contraction_weights(R, 0.5)
    assert np.all(w > 0) and slack >= 0
    assert np.all(R @ w <= 0.5 * w + 1e-15)
    assert ctr.dobrushin_contraction_weights(R, 1 - rho + 0.05) is None
    w0, _ = ctr.dobrushin_contraction_weights(np.zeros((3, 3)), 0.2)
    assert np.all(w0 == 1)


def test_dobrushin_eta_bound(ising_c4, ising_c4_table):
    info = ctr.dobrushin_eta_bound(dobrushin_matrix(ising_c4))
    assert info["rho"] == pytest.approx(np.tanh(0.3), abs=1e-9)
    assert info["eps"] > 0
    assert spectral_independence(ising_c4_table).value <= info["eta_bound"]


def test_sum_absolute_influence_dominates_lambda1(potts_p3):
    T = enumerate_table(potts_p3)
    J = influence_matrix(T)
    res = ctr.sum_absolute_influence(J)
    assert res["holds"]
    wres = ctr.sum_absolute_influence(J, weights=np.array([1.0, 2.0, 0.5]))
    assert wres["holds"]
    assert res["lambda1"] == wres["lambda1"]
