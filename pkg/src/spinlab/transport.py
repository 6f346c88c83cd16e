"""Metrics on configuration space and exact 1-Wasserstein distances.

The optimal-transport solver is a transportation simplex (MODI / u-v
method) compiled with numba.  Problems here are small and numerous (rows
of local Markov kernels), so a tight compiled loop beats calling a general
LP solver per pair.  If the simplex ever hits its iteration cap the problem
is handed to scipy's HiGHS LP solver instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from .model import all_configurations, encode

PIVOT_EPS = 1e-12


# --------------------------------------------------------------------------
# metrics


@dataclass(frozen=True, eq=False)
class Metric:
    """Metric on ``[q]^n``.

    ``kind`` is ``"hamming"``, ``"weighted_hamming"`` (needs ``weights``) or
    ``"custom"`` (needs ``matrix`` indexed by the lexicographic codes in
    ``codes``).  ``gamma`` is the equivalence factor to Hamming, if known.
    """

    kind: str = "hamming"
    weights: np.ndarray | None = None
    matrix: np.ndarray | None = None
    codes: np.ndarray | None = None
    q: int | None = None
    gamma: float | None = None
    label: str = field(default="")

    def __post_init__(self):
        if self.kind == "weighted_hamming":
            w = np.asarray(self.weights, dtype=float)
            if w.ndim != 1 or np.any(w <= 0):
                raise ValueError("weighted Hamming needs positive per-vertex weights")
            object.__setattr__(self, "weights", w)
            if self.gamma is None:
                object.__setattr__(self, "gamma", float(max(w.max(), 1.0 / w.min())))
        elif self.kind == "custom":
            if self.matrix is None or self.codes is None or self.q is None:
                raise ValueError("custom metric needs matrix, codes and q")
            M = np.asarray(self.matrix, dtype=float)
            c = np.asarray(self.codes, dtype=np.int64)
            if M.shape != (len(c), len(c)):
                raise ValueError("custom metric matrix must be square over its codes")
            if np.any(np.diff(c) <= 0):
                raise ValueError("custom metric codes must be strictly increasing")
            object.__setattr__(self, "matrix", M)
            object.__setattr__(self, "codes", c)
        elif self.kind == "hamming":
            if self.gamma is None:
                object.__setattr__(self, "gamma", 1.0)
        else:
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if not self.label:
            object.__setattr__(self, "label", self.kind)

    def _index(self, states: np.ndarray) -> np.ndarray:
        c = encode(states, self.q)
        pos = np.searchsorted(self.codes, c)
        pos = np.minimum(pos, len(self.codes) - 1)
        if np.any(self.codes[pos] != c):
            raise ValueError("configuration outside the custom metric's space")
        return pos

    def pairwise(self, S1: np.ndarray, S2: np.ndarray) -> np.ndarray:
        """Distance matrix between rows of ``S1`` and rows of ``S2``."""
        S1 = np.atleast_2d(S1)
        S2 = np.atleast_2d(S2)
        if S1.shape[1] != S2.shape[1]:
            raise ValueError("configuration length mismatch")
        if self.kind == "custom":
            return self.matrix[np.ix_(self._index(S1), self._index(S2))]
        diff = S1[:, None, :] != S2[None, :, :]
        if self.kind == "hamming":
            return diff.sum(axis=2).astype(float)
        if len(self.weights) != S1.shape[1]:
            raise ValueError("weight vector length mismatch")
        return diff.astype(float) @ self.weights

    def restricted(self, states: np.ndarray) -> np.ndarray:
        return self.pairwise(states, states)


def hamming() -> Metric:
    return Metric("hamming")


def weighted_hamming(w) -> Metric:
    return Metric("weighted_hamming", weights=np.asarray(w, dtype=float), label="weighted_hamming")


def custom_metric(matrix, states: np.ndarray, q: int, gamma: float | None = None, check: bool = True) -> Metric:
    """Metric given by an explicit distance matrix on the listed states."""
    states = np.asarray(states)
    codes = encode(states, q)
    order = np.argsort(codes)
    M = np.asarray(matrix, dtype=float)[np.ix_(order, order)]
    m = Metric("custom", matrix=M, codes=codes[order], q=q, gamma=gamma)
    if check:
        check_metric(m, states[order])
    return m


def check_metric(m: Metric, states: np.ndarray, tol: float = 1e-12) -> None:
    """Exhaustive metric-axiom and gamma-equivalence check; raises on violation."""
    D = m.restricted(states)
    if np.any(D < -tol) or not np.allclose(D, D.T, rtol=0, atol=tol):
        raise ValueError("metric must be symmetric and nonnegative")
    off = ~np.eye(len(D), dtype=bool)
    if np.any(np.diag(D) != 0) or np.any(D[off] <= 0):
        raise ValueError("identity of indiscernibles fails")
    for k in range(len(D)):
        if np.any(D > D[:, [k]] + D[[k], :] + tol):
            raise ValueError("triangle inequality fails")
    if m.gamma is not None:
        H = hamming().restricted(states)
        g = m.gamma
        if np.any(D > g * H + tol) or np.any(D < H / g - tol):
            raise ValueError(f"metric is not {g}-equivalent to Hamming")


def random_equivalent_metric(n: int, q: int, gamma: float, rng: np.random.Generator) -> Metric:
    """Random path metric on ``[q]^n`` that is ``gamma``-equivalent to Hamming.

    Hamming-adjacent pairs get independent lengths uniform in
    ``[1/gamma, gamma]``; the metric is the shortest-path closure.
    """
    states = all_configurations(n, q)
    N = len(states)
    codes = encode(states, q)
    rows, cols = [], []
    for v in range(n):
        p = q ** (n - 1 - v)
        for b in range(1, q):
            nxt = states[:, v] + b
            ok = nxt < q
            rows.append(np.flatnonzero(ok))
            cols.append(codes[ok] + b * p)
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    lengths = rng.uniform(1.0 / gamma, gamma, size=len(r))
    G = coo_matrix((lengths, (r, c)), shape=(N, N)).tocsr()
    D = shortest_path(G, method="D", directed=False)
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return Metric("custom", matrix=D, codes=codes, q=q, gamma=gamma, label=f"custom(gamma={gamma})")


def distance(m: Metric, sigma, tau) -> float:
    """Distance between two configurations."""
    s, t = np.asarray(sigma), np.asarray(tau)
    if s.shape != t.shape:
        raise ValueError("configuration length mismatch")
    return float(m.pairwise(s[None, :], t[None, :])[0, 0])


def lipschitz_constant(m: Metric, states: np.ndarray, f: np.ndarray, D: np.ndarray | None = None) -> float:
    """``max |f(s) - f(t)| / d(s, t)`` over distinct states."""
    f = np.asarray(f, dtype=float)
    if len(f) < 2:
        return 0.0
    if D is None:
        D = m.restricted(states)
    diff = np.abs(f[:, None] - f[None, :])
    off = ~np.eye(len(f), dtype=bool)
    return float((diff[off] / D[off]).max())


# --------------------------------------------------------------------------
# transportation simplex


@nb.njit(cache=True)
def _find(uf, a):
    while uf[a] != a:
        uf[a] = uf[uf[a]]
        a = uf[a]
    return a


@nb.njit(cache=True)
def _initial_basis(a, b, C):
    """Least-cost start completed to a spanning tree with zero-flow cells."""
    m = len(a)
    n = len(b)
    K = m + n - 1
    bi = np.empty(K, np.int64)
    bj = np.empty(K, np.int64)
    x = np.zeros(K)
    ra = a.copy()
    rb = b.copy()
    uf = np.arange(m + n)
    order = np.argsort(C.ravel(), kind="mergesort")
    row_left = m
    col_left = n
    k = 0
    for t in range(m * n):
        if row_left == 0 or col_left == 0:
            break
        i = order[t] // n
        j = order[t] % n
        if ra[i] <= 0.0 or rb[j] <= 0.0:
            continue
        ri = _find(uf, i)
        rj = _find(uf, m + j)
        if ri == rj or k >= K:
            return bi, bj, x, 0, False
        uf[ri] = rj
        f = min(ra[i], rb[j])
        bi[k] = i
        bj[k] = j
        x[k] = f
        k += 1
        if ra[i] <= rb[j]:
            rb[j] -= f
            ra[i] = 0.0
            row_left -= 1
            if rb[j] <= 0.0:
                rb[j] = 0.0
                col_left -= 1
        else:
            ra[i] -= f
            rb[j] = 0.0
            col_left -= 1
    # leftover rounding mass is dropped here; connect components with zeros
    for t in range(m * n):
        if k >= K:
            break
        i = order[t] // n
        j = order[t] % n
        ri = _find(uf, i)
        rj = _find(uf, m + j)
        if ri != rj:
            uf[ri] = rj
            bi[k] = i
            bj[k] = j
            x[k] = 0.0
            k += 1
    return bi, bj, x, k, k == K


@nb.njit(cache=True)
def _nw_basis(a, b):
    m = len(a)
    n = len(b)
    K = m + n - 1
    bi = np.empty(K, np.int64)
    bj = np.empty(K, np.int64)
    x = np.empty(K)
    ra = a.copy()
    rb = b.copy()
    i = 0
    j = 0
    for k in range(K):
        t = min(ra[i], rb[j])
        bi[k] = i
        bj[k] = j
        x[k] = t
        ra[i] -= t
        rb[j] -= t
        if i == m - 1:
            j += 1
        elif j == n - 1:
            i += 1
        elif ra[i] <= rb[j]:
            i += 1
        else:
            j += 1
    return bi, bj, x


@nb.njit(cache=True)
def _simplex(a, b, C, eps, max_iter):
    m = len(a)
    n = len(b)
    K = m + n - 1
    N = m + n
    bi, bj, x, k0, ok = _initial_basis(a, b, C)
    if not ok:
        bi, bj, x = _nw_basis(a, b)
    u = np.zeros(m)
    v = np.zeros(n)
    deg = np.zeros(N, np.int64)
    start = np.zeros(N + 1, np.int64)
    fill = np.zeros(N, np.int64)
    nbr = np.empty(2 * K, np.int64)
    cell = np.empty(2 * K, np.int64)
    parent = np.empty(N, np.int64)
    pcell = np.empty(N, np.int64)
    depth = np.empty(N, np.int64)
    order = np.empty(N, np.int64)
    seen = np.zeros(N, np.bool_)
    up = np.empty(N, np.int64)
    down = np.empty(N, np.int64)
    it = 0
    status = 0
    while True:
        deg[:] = 0
        for k in range(K):
            deg[bi[k]] += 1
            deg[m + bj[k]] += 1
        start[0] = 0
        for w in range(N):
            start[w + 1] = start[w] + deg[w]
            fill[w] = start[w]
        for k in range(K):
            r = bi[k]
            c = m + bj[k]
            nbr[fill[r]] = c
            cell[fill[r]] = k
            fill[r] += 1
            nbr[fill[c]] = r
            cell[fill[c]] = k
            fill[c] += 1
        seen[:] = False
        order[0] = 0
        seen[0] = True
        parent[0] = -1
        pcell[0] = -1
        depth[0] = 0
        u[0] = 0.0
        head = 0
        tail = 1
        while head < tail:
            w = order[head]
            head += 1
            for t in range(start[w], start[w + 1]):
                z = nbr[t]
                if not seen[z]:
                    seen[z] = True
                    parent[z] = w
                    pcell[z] = cell[t]
                    depth[z] = depth[w] + 1
                    kk = cell[t]
                    if z < m:
                        u[z] = C[z, bj[kk]] - v[bj[kk]]
                    else:
                        v[z - m] = C[bi[kk], z - m] - u[bi[kk]]
                    order[tail] = z
                    tail += 1
        best = -eps
        p = -1
        qq = -1
        for r in range(m):
            ur = u[r]
            for c in range(n):
                red = C[r, c] - ur - v[c]
                if red < best:
                    best = red
                    p = r
                    qq = c
        if p < 0:
            break
        it += 1
        if it > max_iter:
            status = 1
            break
        # tree path between row p and column qq through their common ancestor
        nu_ = 0
        nd = 0
        s1 = m + qq
        s2 = p
        while depth[s1] > depth[s2]:
            up[nu_] = pcell[s1]
            nu_ += 1
            s1 = parent[s1]
        while depth[s2] > depth[s1]:
            down[nd] = pcell[s2]
            nd += 1
            s2 = parent[s2]
        while s1 != s2:
            up[nu_] = pcell[s1]
            nu_ += 1
            s1 = parent[s1]
            down[nd] = pcell[s2]
            nd += 1
            s2 = parent[s2]
        L = nu_ + nd
        path = np.empty(L, np.int64)
        for s in range(nu_):
            path[s] = up[s]
        for s in range(nd):
            path[nu_ + s] = down[nd - 1 - s]
        # path[0] touches column qq; signs alternate starting with minus
        theta = np.inf
        leave = -1
        for s in range(0, L, 2):
            kk = path[s]
            if x[kk] < theta:
                theta = x[kk]
                leave = kk
        for s in range(L):
            kk = path[s]
            if s % 2 == 0:
                x[kk] -= theta
            else:
                x[kk] += theta
        bi[leave] = p
        bj[leave] = qq
        x[leave] = theta
    return bi, bj, x, u, v, status


@dataclass
class TransportResult:
    """Optimal cost, coupling as ``(i, j, mass)`` triples, and dual potentials."""

    cost: float
    coupling: list[tuple[int, int, float]]
    u: np.ndarray
    v: np.ndarray
    solver: str = "simplex"


def transport(a: np.ndarray, b: np.ndarray, C: np.ndarray, max_iter: int | None = None) -> TransportResult:
    """Exact balanced optimal transport between weight vectors ``a`` and ``b``.

    Zero-mass rows/columns are dropped before solving; indices in the result
    refer to the original vectors.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    C = np.asarray(C, dtype=float)
    ia = np.flatnonzero(a > 0)
    ib = np.flatnonzero(b > 0)
    sa, sb = a[ia], b[ib]
    sb = sb * (sa.sum() / sb.sum())
    Cs = np.ascontiguousarray(C[np.ix_(ia, ib)])
    u_full = np.zeros(len(a))
    v_full = np.zeros(len(b))
    if len(ia) == 1 or len(ib) == 1:
        if len(ia) == 1:
            flows = sb[None, :].copy()
            v_full[ib] = Cs[0]
        else:
            flows = sa[:, None].copy()
            u_full[ia] = Cs[:, 0]
        cost = float((flows * Cs).sum())
        coupling = [(int(ia[r]), int(ib[c]), float(flows[r, c])) for r in range(len(ia)) for c in range(len(ib))]
        return TransportResult(cost, coupling, u_full, v_full)
    if max_iter is None:
        max_iter = 50 * (len(ia) + len(ib)) ** 2
    bi, bj, x, u, v, status = _simplex(sa, sb, Cs, PIVOT_EPS, max_iter)
    if status != 0:
        return _transport_lp(a, b, C, ia, ib, sa, sb, Cs)
    x = np.maximum(x, 0.0)
    order = np.lexsort((bj, bi))
    coupling = [(int(ia[bi[k]]), int(ib[bj[k]]), float(x[k])) for k in order if x[k] > 0]
    cost = float(np.dot(x, Cs[bi, bj]))
    u_full[ia] = u
    v_full[ib] = v
    return TransportResult(cost, coupling, u_full, v_full)


def _transport_lp(a, b, C, ia, ib, sa, sb, Cs) -> TransportResult:
    m, n = len(ia), len(ib)
    A_eq = np.zeros((m + n, m * n))
    for r in range(m):
        A_eq[r, r * n : (r + 1) * n] = 1.0
    for c in range(n):
        A_eq[m + c, c::n] = 1.0
    res = linprog(Cs.ravel(), A_eq=A_eq, b_eq=np.concatenate([sa, sb]), bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    flows = res.x.reshape(m, n)
    coupling = [(int(ia[r]), int(ib[c]), float(flows[r, c])) for r in range(m) for c in range(n) if flows[r, c] > 0]
    u = np.zeros(len(a))
    v = np.zeros(len(b))
    duals = res.eqlin.marginals
    u[ia] = duals[:m]
    v[ib] = duals[m:]
    return TransportResult(float(res.fun), coupling, u, v, solver="highs")


def wasserstein1(m: Metric, states: np.ndarray, mu: np.ndarray, nu: np.ndarray, states_nu: np.ndarray | None = None) -> TransportResult:
    """Exact ``W_1`` between two distributions on enumerated state lists.

    ``mu`` lives on ``states`` and ``nu`` on ``states_nu`` (default: the same
    list).  Only supports enter the cost matrix.
    """
    states_nu = states if states_nu is None else states_nu
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    ia = np.flatnonzero(mu > 0)
    ib = np.flatnonzero(nu > 0)
    C = m.pairwise(states[ia], states_nu[ib])
    res = transport(mu[ia], nu[ib], C)
    coupling = [(int(ia[i]), int(ib[j]), w) for i, j, w in res.coupling]
    u = np.zeros(len(mu))
    v = np.zeros(len(nu))
    u[ia] = res.u
    v[ib] = res.v
    return TransportResult(res.cost, coupling, u, v, res.solver)


def w1_cost(a: np.ndarray, b: np.ndarray, C: np.ndarray) -> float:
    """Cost-only ``W_1`` for dense weight vectors over a shared cost matrix."""
    return transport(a, b, C).cost


@nb.njit(cache=True)
def _pair_costs(indptr, indices, data, D, I, J, eps, max_iter):
    out = np.empty(len(I))
    status = np.zeros(len(I), np.int64)
    for k in range(len(I)):
        i, j = I[k], J[k]
        si = indices[indptr[i] : indptr[i + 1]]
        sj = indices[indptr[j] : indptr[j + 1]]
        a = data[indptr[i] : indptr[i + 1]].copy()
        b = data[indptr[j] : indptr[j + 1]].copy()
        b *= a.sum() / b.sum()
        C = np.empty((len(si), len(sj)))
        for r in range(len(si)):
            for c in range(len(sj)):
                C[r, c] = D[si[r], sj[c]]
        if len(si) == 1:
            out[k] = (b * C[0]).sum()
        elif len(sj) == 1:
            out[k] = (a * C[:, 0]).sum()
        else:
            bi, bj, x, u, v, st = _simplex(a, b, C, eps, max_iter)
            status[k] = st
            tot = 0.0
            for t in range(len(x)):
                if x[t] > 0:
                    tot += x[t] * C[bi[t], bj[t]]
            out[k] = tot
    return out, status


def row_pair_w1(P, D: np.ndarray, I: np.ndarray, J: np.ndarray) -> np.ndarray:
    """``W_1(P[i], P[j])`` for every pair ``(I[k], J[k])`` of rows of a CSR kernel.

    ``D`` is the metric restricted to the kernel's states.
    """
    P = P.tocsr()
    P.eliminate_zeros()
    P.sort_indices()
    I = np.asarray(I, dtype=np.int64)
    J = np.asarray(J, dtype=np.int64)
    D = np.ascontiguousarray(D, dtype=float)
    if len(I) == 0:
        return np.zeros(0)
    nnz = np.diff(P.indptr).max()
    costs, status = _pair_costs(
        P.indptr.astype(np.int64), P.indices.astype(np.int64), P.data.astype(float), D, I, J, PIVOT_EPS, 50 * (2 * nnz) ** 2
    )
    for k in np.flatnonzero(status != 0):
        i, j = I[k], J[k]
        costs[k] = transport(P[i].toarray().ravel(), P[j].toarray().ravel(), D).cost
    return costs
