import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from spinlab.model import all_configurations
from spinlab.transport import (
    check_metric,
    custom_metric,
    distance,
    hamming,
    lipschitz_constant,
    random_equivalent_metric,
    row_pair_w1,
    transport,
    wasserstein1,
    weighted_hamming,
)


def lp_cost(a, b, C):
    m, n = C.shape
    A = np.zeros((m + n, m * n))
    for r in range(m):
        A[r, r * n : (r + 1) * n] = 1
    for c in range(n):
        A[m + c, c::n] = 1
    res = linprog(C.ravel(), A_eq=A, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs")
    return res.fun


@st.composite
def ot_problems(draw):
    m = draw(st.integers(1, 7))
    n = draw(st.integers(1, 7))
    seed = draw(st.integers(0, 2**31))
    rng = np.random.default_rng(seed)
    a = rng.dirichlet(np.ones(m)) * (rng.uniform(size=m) < 0.8)
    b = rng.dirichlet(np.ones(n)) * (rng.uniform(size=n) < 0.8)
    if a.sum() == 0:
        a[0] = 1.0
    if b.sum() == 0:
        b[-1] = 1.0
    a /= a.sum()
    b /= b.sum()
    if draw(st.booleans()):
        C = rng.integers(0, 4, size=(m, n)).astype(float)  # ties and degeneracy
    else:
        C = rng.uniform(0, 5, size=(m, n))
    return a, b, C


@given(ot_problems())
@settings(max_examples=200, deadline=None)
def test_transport_matches_linear_program(prob):
    a, b, C = prob
    res = transport(a, b, C)
    assert res.cost == pytest.approx(lp_cost(a, b, C), abs=1e-10)
    plan = np.zeros_like(C)
    for i, j, w in res.coupling:
        plan[i, j] += w
    assert np.allclose(plan.sum(axis=1), a, atol=1e-12)
    assert np.allclose(plan.sum(axis=0), b, atol=1e-12)
    assert (plan * C).sum() == pytest.approx(res.cost, abs=1e-12)


@given(ot_problems())
@settings(max_examples=100, deadline=None)
def test_dual_potentials_are_feasible(prob):
    a, b, C = prob
    res = transport(a, b, C)
    ia, ib = np.flatnonzero(a > 0), np.flatnonzero(b > 0)
    slack = C[np.ix_(ia, ib)] - res.u[ia][:, None] - res.v[ib][None, :]
    assert slack.min() >= -1e-9
    assert res.u[ia] @ a[ia] + res.v[ib] @ b[ib] == pytest.approx(res.cost, abs=1e-9)


def test_point_masses_cost_is_distance():
    states = all_configurations(3, 2)
    mu = np.zeros(8)
    nu = np.zeros(8)
    mu[0] = nu[7] = 1.0
    assert wasserstein1(hamming(), states, mu, nu).cost == 3.0
    w = weighted_hamming([1.0, 2.0, 0.5])
    assert wasserstein1(w, states, mu, nu).cost == pytest.approx(3.5)


def test_metric_helpers():
    w = weighted_hamming([0.5, 2.0])
    assert w.gamma == 2.0
    assert distance(w, [0, 1], [1, 1]) == 0.5
    with pytest.raises(ValueError):
        weighted_hamming([1.0, 0.0])
    states = all_configurations(2, 2)
    f = np.array([0.0, 1.0, 3.0, 3.0])
    assert lipschitz_constant(hamming(), states, f) == 3.0


def test_custom_metric_validation():
    states = all_configurations(2, 2)
    H = hamming().restricted(states)
    m = custom_metric(H * 1.2, states, q=2, gamma=1.2)
    assert np.allclose(m.restricted(states), 1.2 * H)
    bad = H.copy()
    bad[0, 3] = bad[3, 0] = 5.0  # breaks the triangle inequality
    with pytest.raises(ValueError):
        custom_metric(bad, states, q=2)
    with pytest.raises(ValueError):
        custom_metric(H * 3.0, states, q=2, gamma=1.5)


@given(st.integers(1, 3), st.integers(2, 3), st.integers(0, 2**31))
@settings(max_examples=20, deadline=None)
def test_random_equivalent_metric_is_a_gamma_metric(n, q, seed):
    m = random_equivalent_metric(n, q, 1.5, np.random.default_rng(seed))
    check_metric(m, all_configurations(n, q))


@given(st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_row_pair_w1_matches_transport(seed):
    rng = np.random.default_rng(seed)
    N = 6
    P = rng.uniform(size=(N, N)) * (rng.uniform(size=(N, N)) < 0.5)
    P[np.arange(N), np.arange(N)] += 0.1
    P /= P.sum(axis=1, keepdims=True)
    X = rng.uniform(size=(N, 2))
    D = np.abs(X[:, None, :] - X[None, :, :]).sum(axis=2)
    I, J = np.triu_indices(N, 1)
    got = row_pair_w1(sp.csr_matrix(P), D, I, J)
    want = [transport(P[i], P[j], D).cost for i, j in zip(I, J)]
    assert np.allclose(got, want, atol=1e-12)
