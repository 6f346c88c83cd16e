"""Contraction rates, locality constants and their spectral-independence bounds.

Contraction is measured with exact optimal transport: for a pair of states
the best coupling of the two one-step laws has cost ``W_1``, so the
measured rate is the smallest ``kappa`` any coupling can certify on the
examined pairs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import Kernel
from .gibbs import GibbsTable, InfluenceMatrix, iter_pinnings, lambda1, spectral_radius
from .model import EMPTY, InfeasibleError, Pinning
from .transport import Metric, hamming, lipschitz_constant, row_pair_w1, transport

MAX_PAIR_STATES = 1500


@dataclass
class ContractionReport:
    """Largest ``W_1(P(s,.), P(t,.)) / d(s,t)`` over the examined pairs.

    ``surrogate`` marks adjacent-pairs mode with a non-Hamming metric, where
    the value is not a certified contraction rate.
    """

    kappa: float
    metric: str
    mode: str
    worst_pair: tuple[np.ndarray, np.ndarray] | None
    pairs: int
    surrogate: bool = False

    def to_dict(self) -> dict:
        wp = None if self.worst_pair is None else [s.tolist() for s in self.worst_pair]
        return {"kappa": self.kappa, "metric": self.metric, "mode": self.mode, "worst_pair": wp, "pairs": self.pairs, "surrogate": self.surrogate}


def _pairs(table: GibbsTable, mode: str) -> tuple[np.ndarray, np.ndarray]:
    N = table.N
    if mode == "all_pairs":
        I, J = np.triu_indices(N, k=1)
        return I.astype(np.int64), J.astype(np.int64)
    if mode == "adjacent_pairs":
        H = hamming().restricted(table.states)
        I, J = np.nonzero(np.triu(H == 1, k=1))
        return I.astype(np.int64), J.astype(np.int64)
    raise ValueError(f"unknown mode {mode!r}")


def measure_kappa(kernel: Kernel, table: GibbsTable, metric: Metric, mode: str = "all_pairs", max_states: int = MAX_PAIR_STATES) -> ContractionReport:
    """Exact contraction rate of ``kernel`` on the table's states under ``metric``."""
    if mode == "all_pairs" and table.N > max_states:
        raise ValueError(f"{table.N} states exceed the all-pairs cap {max_states}")
    P = kernel.matrix(table)
    D = metric.restricted(table.states)
    I, J = _pairs(table, mode)
    surrogate = mode == "adjacent_pairs" and metric.kind != "hamming"
    if len(I) == 0:
        return ContractionReport(0.0, metric.label, mode, None, 0, surrogate)
    ratios = row_pair_w1(P, D, I, J) / D[I, J]
    k = int(np.argmax(ratios))
    worst = (table.states[I[k]].copy(), table.states[J[k]].copy())
    return ContractionReport(float(ratios[k]), metric.label, mode, worst, len(I), surrogate)


@dataclass
class PinnedContraction:
    """Contraction rate of every pinned chain; ``kappa`` is their maximum."""

    kappa: float
    witness: Pinning
    per_pinning: dict[tuple, float] = field(repr=False)
    reports: dict[tuple, ContractionReport] = field(repr=False, default_factory=dict)


def measure_kappa_pinned(
    kernel_factory: Callable[[Pinning], Kernel],
    table: GibbsTable,
    metric: Metric,
    mode: str = "all_pairs",
    pinnings=None,
    max_states: int = MAX_PAIR_STATES,
) -> PinnedContraction:
    """``kappa^tau`` for each pinning (exhaustive unless ``pinnings`` is given)."""
    best, wit = -1.0, EMPTY
    per, reps = {}, {}
    for tau, idx in pinnings if pinnings is not None else iter_pinnings(table):
        sub = table if not tau.items else table.subtable(idx, tau)
        rep = measure_kappa(kernel_factory(sub.pinning), sub, metric, mode, max_states)
        key = sub.pinning.items
        per[key] = rep.kappa
        reps[key] = rep
        if rep.kappa > best:
            best, wit = rep.kappa, sub.pinning
    return PinnedContraction(best, wit, per, reps)


def predicted_eta(kind: str, kappa: float, n: int | None = None, gamma: float = 1.0, Phi: float | None = None, D: float | None = None, M: int | None = None) -> float:
    """Spectral-independence constant implied by a contraction rate.

    Kinds:
        ``glauber_weighted``: ``2 / ((1 - kappa) n)``.
        ``glauber_gamma``: ``2 gamma^2 / ((1 - kappa) n)``.
        ``general``: ``2 gamma^2 D M / (1 - kappa)``.
        ``locality``: ``2 gamma^2 Phi / (1 - kappa)``.

    ``n`` is the total number of vertices, pinned ones included.
    """
    if kappa >= 1:
        raise ValueError(f"no bound for kappa = {kappa} >= 1")
    gap = 1.0 - kappa
    if kind == "glauber_weighted":
        return 2.0 / (gap * n)
    if kind == "glauber_gamma":
        return 2.0 * gamma**2 / (gap * n)
    if kind == "general":
        return 2.0 * gamma**2 * D * M / gap
    if kind == "locality":
        return 2.0 * gamma**2 * Phi / gap
    raise ValueError(f"unknown kind {kind!r}")


def remark_eta(kappas_by_size: dict[int, float]) -> float:
    """Alternative constant ``max_l 2 / ((1 - kappa_l) l)`` over free-set sizes ``l``."""
    vals = [2.0 / ((1.0 - k) * l) for l, k in kappas_by_size.items() if l > 0 and k < 1]
    return max(vals) if vals else 0.0


# --------------------------------------------------------------------------
# locality and the Stein-type comparison


def _cross_w1(P_rows, Q_rows, D: np.ndarray) -> np.ndarray:
    """``W_1(P_rows[k], Q_rows[k])`` with both rows indexed by the same states."""
    out = np.empty(P_rows.shape[0])
    for k in range(P_rows.shape[0]):
        out[k] = transport(P_rows[k].toarray().ravel(), Q_rows[k].toarray().ravel(), D).cost
    return out


def _embed(table: GibbsTable, sub: GibbsTable, Q):
    """Re-index a kernel on ``sub``'s states as rows over ``table``'s states."""
    import scipy.sparse as sp

    pos = table.index_of(sub.states)
    if np.any(pos < 0):
        raise InfeasibleError("sub-table states are not in the table")
    Q = Q.tocoo()
    return sp.csr_matrix((Q.data, (Q.row, pos[Q.col])), shape=(sub.N, table.N)), pos


def measure_locality_phi(kernel_factory: Callable[[Pinning], Kernel], table: GibbsTable, x: int, a: int, metric: Metric | None = None) -> float:
    """``max_sigma W_1(P^tau(sigma,.), P^{tau+(x,a)}(sigma,.))`` over ``sigma`` in the smaller space.

    ``table`` is the measure ``mu^tau``; Hamming metric by default.
    """
    metric = metric or hamming()
    tau2 = Pinning(((x, a),))
    sub = table.restrict(tau2)
    P = kernel_factory(table.pinning).matrix(table)
    Q, pos = _embed(table, sub, kernel_factory(sub.pinning).matrix(sub))
    D = metric.restricted(table.states)
    return float(_cross_w1(P[pos], Q, D).max())


@dataclass
class SteinCase:
    """Both sides of the comparison bound for one batch of functions."""

    kappa: float
    expected_w1: float
    lhs: np.ndarray
    lipschitz: np.ndarray
    rhs: np.ndarray

    @property
    def margins(self) -> np.ndarray:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return bool(np.all(self.margins >= -1e-9))


@dataclass
class SteinSetup:
    """Precomputed pieces for checking many ``f`` against one pair of chains."""

    table: GibbsTable
    sub: GibbsTable
    kappa: float
    expected_w1: float
    D: np.ndarray = field(repr=False)
    nu: np.ndarray = field(repr=False)


def stein_setup(P_kernel: Kernel, table: GibbsTable, Q_kernel: Kernel, sub: GibbsTable, metric: Metric, kappa: float | None = None) -> SteinSetup:
    """``kappa`` of ``P`` (all pairs) and ``E_nu[W_1(P(s,.), Q(s,.))]``.

    ``sub`` is the stationary table of ``Q``; its states must lie in ``table``.
    """
    if kappa is None:
        kappa = measure_kappa(P_kernel, table, metric).kappa
    if kappa >= 1:
        raise ValueError(f"no comparison bound for kappa = {kappa} >= 1")
    Q, pos = _embed(table, sub, Q_kernel.matrix(sub))
    P = P_kernel.matrix(table)
    D = metric.restricted(table.states)
    w = _cross_w1(P[pos], Q, D)
    nu = np.zeros(table.N)
    nu[pos] = sub.probs
    return SteinSetup(table, sub, kappa, float(sub.probs @ w), D, nu)


def verify_stein_bound(setup: SteinSetup, F: np.ndarray) -> SteinCase:
    """``|E_mu f - E_nu f| <= L_d(f) / (1 - kappa) * E_nu[W_1(P, Q)]`` for each column of ``F``."""
    F = np.asarray(F, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    lhs = np.abs(setup.table.probs @ F - setup.nu @ F)
    L = np.array([lipschitz_constant(None, setup.table.states, F[:, k], setup.D) for k in range(F.shape[1])])
    rhs = L / (1.0 - setup.kappa) * setup.expected_w1
    return SteinCase(setup.kappa, setup.expected_w1, lhs, L, rhs)


def sign_function(J: InfluenceMatrix, table: GibbsTable, x: int, a: int) -> np.ndarray:
    """``f(s) = sum_{(y,b)} sgn J(x,a; y,b) 1(s_y = b)``; its ``nu - mu`` gap is the absolute row sum."""
    row = J.index.index((x, a))
    f = np.zeros(table.N)
    for col, (y, b) in enumerate(J.index):
        s = np.sign(J.entries[row, col])
        if s:
            f += s * (table.states[:, y] == b)
    return f


# --------------------------------------------------------------------------
# Dobrushin weights and absolute influence sums


def dobrushin_contraction_weights(R: np.ndarray, eps: float, deltas=(1e-3, 1e-5, 1e-7, 1e-9, 1e-11)) -> tuple[np.ndarray, float] | None:
    """Positive ``w`` with ``R w <= (1 - eps) w`` entrywise, and the smallest slack.

    Tries the Perron vector of ``R + delta O`` for decreasing ``delta``;
    returns ``None`` when no candidate satisfies the inequality.
    """
    R = np.asarray(R, dtype=float)
    n = len(R)
    if not R.any():
        w = np.ones(n)
        return (w, float(((1 - eps) * w).min())) if eps < 1 else None
    O = np.ones((n, n))
    for d in deltas:
        vals, vecs = np.linalg.eig(R + d * O)
        w = np.abs(vecs[:, int(np.argmax(vals.real))].real)
        if np.any(w <= 0):
            continue
        w = w / w.max()
        slack = (1 - eps) * w - R @ w
        if slack.min() >= 0:
            return w, float(slack.min())
    return None


def sum_absolute_influence(J: InfluenceMatrix, weights: np.ndarray | None = None) -> dict:
    """``S(x,a) = sum |J(x,a; y,b)|`` (weighted: ``sum w(y)|J| / w(x)``) and the ``lambda1 <= max S`` check."""
    A = np.abs(J.entries)
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        wy = np.array([w[y] for y, _ in J.index])
        A = A * wy[None, :] / wy[:, None]
    S = A.sum(axis=1) if A.size else np.zeros(0)
    lam = lambda1(J)
    smax = float(S.max()) if S.size else 0.0
    return {"S": {J.index[i]: float(S[i]) for i in range(len(S))}, "max": smax, "lambda1": lam, "holds": lam <= smax + 1e-12}


def dobrushin_eta_bound(R: np.ndarray) -> dict:
    """``eps = 1 - rho(R)`` (rigorous upper estimate of ``rho``) and ``eta <= 2 / eps``."""
    sr = spectral_radius(R)
    eps = 1.0 - sr.upper
    return {"rho": sr.value, "rho_upper": sr.upper, "eps": eps, "eta_bound": 2.0 / eps if eps > 0 else np.inf}
