"""Entropy functionals, factorization constants, decay rates and mixing.

Test functions are handled in batches: an ``(N, K)`` array holds ``K``
nonnegative functions on the ``N`` states of a table, and every functional
returns a length-``K`` vector.  Natural logarithms throughout.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import xlogy

from .dynamics import BlockWeights, Kernel, coverage_delta
from .fibers import Fibers
from .gibbs import GibbsTable
from .model import Partition

DEGENERATE_ENT = 1e-13


# --------------------------------------------------------------------------
# primitives


def _cols(F: np.ndarray) -> tuple[np.ndarray, bool]:
    F = np.asarray(F, dtype=float)
    return (F[:, None], True) if F.ndim == 1 else (F, False)


def _out(v: np.ndarray, single: bool):
    return float(v[0]) if single else v


def ent(p: np.ndarray, F: np.ndarray):
    """``Ent(f) = mu[f log(f / mu f)]`` under weights ``p`` (batched)."""
    F, single = _cols(F)
    if np.any(F < 0):
        raise ValueError("entropy needs f >= 0")
    m = p @ F
    # mu[f] = 0 means f vanishes on the support: zero entropy
    safe = np.where(m > 0, m, 1.0)
    return _out(np.where(m > 0, p @ xlogy(F, F / safe), 0.0), single)


def cond_ent(p: np.ndarray, fibers: Fibers, F: np.ndarray):
    """``mu[Ent(f | fibre)]`` = ``mu[f log(f / E[f | fibre])]`` (batched)."""
    F, single = _cols(F)
    E = fibers.expect(F)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(F > 0, F / np.where(E > 0, E, 1.0), 0.0)
    return _out(p @ xlogy(F, ratio), single)


def entropy(table: GibbsTable, f: np.ndarray):
    """Entropy of ``f`` under the table's measure; ``mu[f]`` must be positive."""
    F, _ = _cols(f)
    if np.any(table.probs @ F <= 0):
        raise ValueError("entropy needs mu[f] > 0")
    return ent(table.probs, f)


def conditional_entropy_avg(table: GibbsTable, B, f: np.ndarray):
    """``mu[Ent_B f]``: average entropy of ``f`` on the fibres of the heat-bath update of ``B``."""
    Bs = set(B) - set(table.pinning.vertices)
    F, single = _cols(f)
    if not Bs:
        return _out(np.zeros(F.shape[1]), single)
    return _out(cond_ent(table.probs, table.block_fibers(Bs), F), single)


def block_average(table: GibbsTable, B, f: np.ndarray) -> np.ndarray:
    """``mu_B f``: conditional expectation given the spins off ``B``."""
    Bs = set(B) - set(table.pinning.vertices)
    if not Bs:
        return np.asarray(f, dtype=float)
    return table.block_fibers(Bs).expect(f)


def given(table: GibbsTable, U, f: np.ndarray) -> np.ndarray:
    """``mu^U f``: conditional expectation given the spins on ``U``."""
    return table.fibers(sorted(U)).expect(f)


def variance(p: np.ndarray, F: np.ndarray):
    F, single = _cols(F)
    m = p @ F
    return _out(p @ (F - m) ** 2, single)


# --------------------------------------------------------------------------
# test functions


def random_functions(
    N: int, K: int, rng: np.random.Generator, kinds: Sequence[str] = ("dirichlet", "expgauss", "indicator"), p: np.ndarray | None = None
) -> np.ndarray:
    """``K`` random nonnegative functions on ``N`` states, cycling through ``kinds``.

    With ``p`` given, each column is rescaled to a density (``p @ f = 1``).
    """
    F = np.empty((N, K))
    for k in range(K):
        kind = kinds[k % len(kinds)]
        if kind == "dirichlet":
            a = float(rng.choice([0.1, 0.5, 1.0, 5.0]))
            F[:, k] = rng.gamma(a, size=N)
        elif kind == "expgauss":
            F[:, k] = np.exp(rng.uniform(0.1, 4.0) * rng.standard_normal(N))
        elif kind == "indicator":
            col = (rng.random(N) < rng.uniform(0.05, 0.9)).astype(float)
            col[int(rng.integers(N))] = 1.0
            F[:, k] = col
        elif kind == "positive":
            F[:, k] = np.exp(rng.uniform(0.1, 2.0) * rng.standard_normal(N))
        else:
            raise ValueError(f"unknown test-function kind {kind!r}")
    if p is not None:
        F /= p @ F
    return F


# --------------------------------------------------------------------------
# factorization functionals


class Functional:
    """An inequality ``lhs(f) <= C rhs(f)`` over nonnegative ``f``."""

    name = "functional"

    def terms(self, table: GibbsTable, F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def degenerate(self, table: GibbsTable, F: np.ndarray) -> np.ndarray:
        return ent(table.probs, F) < DEGENERATE_ENT

    def ratios(self, table: GibbsTable, F: np.ndarray) -> np.ndarray:
        lhs, rhs = self.terms(table, F)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.where(lhs > 0, np.inf, 0.0))
        r[self.degenerate(table, F)] = np.nan
        return r


def _free(table: GibbsTable) -> list[int]:
    return list(table.free)


class Tensorization(Functional):
    """``Ent f <= C sum_x mu[Ent_x f]``."""

    name = "AT"

    def terms(self, table, F):
        rhs = sum(cond_ent(table.probs, table.block_fibers([x]), F) for x in _free(table))
        return ent(table.probs, F), rhs


class BlockFactorization(Functional):
    """``delta(alpha) Ent f <= C sum_B alpha_B mu[Ent_B f]`` for one or several ``alpha``.

    With several distributions the ratio is the largest over them.
    """

    name = "GBF"

    def __init__(self, alphas: BlockWeights | Sequence[BlockWeights]):
        self.alphas = [alphas] if isinstance(alphas, BlockWeights) else list(alphas)

    def terms_for(self, table, F, alpha):
        rhs = 0.0
        for b, w in zip(alpha.blocks, alpha.probs):
            rhs = rhs + w * conditional_entropy_avg(table, b, F)
        return coverage_delta(alpha, table.n) * ent(table.probs, F), rhs

    def terms(self, table, F):
        return self.terms_for(table, F, self.alphas[0])

    def ratios(self, table, F):
        out = None
        for alpha in self.alphas:
            lhs, rhs = self.terms_for(table, F, alpha)
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.where(lhs > 0, np.inf, 0.0))
            out = r if out is None else np.maximum(out, r)
        out[self.degenerate(table, F)] = np.nan
        return out


class UniformBlockFactorization(Functional):
    """``(l/n) Ent f <= C Av_{|S|=l} mu[Ent_S f]``."""

    def __init__(self, ell: int, max_subsets: int | None = 5000, rng: np.random.Generator | None = None):
        self.ell = ell
        self.max_subsets = max_subsets
        self.rng = rng or np.random.default_rng(0)
        self.name = f"UBF({ell})"
        self.sampled = False

    def subsets(self, free: list[int]) -> list[tuple[int, ...]]:
        total = math.comb(len(free), self.ell)
        if self.max_subsets is None or total <= self.max_subsets:
            return list(itertools.combinations(free, self.ell))
        self.sampled = True
        return [tuple(sorted(self.rng.choice(free, self.ell, replace=False).tolist())) for _ in range(self.max_subsets)]

    def terms(self, table, F):
        free = _free(table)
        subs = self.subsets(free)
        rhs = sum(conditional_entropy_avg(table, S, F) for S in subs) / len(subs)
        return (self.ell / len(free)) * ent(table.probs, F), rhs


class KPartiteFactorization(Functional):
    """``Ent f <= C sum_i mu[Ent_{V_i} f]`` over the classes of a partition."""

    name = "kpartite"

    def __init__(self, partition: Partition):
        self.partition = partition

    def terms(self, table, F):
        rhs = sum(conditional_entropy_avg(table, c, F) for c in self.partition.classes)
        return ent(table.probs, F), rhs


class Subadditivity(Functional):
    """``sum_x Ent(f_x) <= C Ent f`` with ``f_x(a) = mu(f | sigma_x = a)``."""

    name = "subadditivity"

    def terms(self, table, F):
        lhs = sum(ent(table.probs, given(table, [x], F)) for x in _free(table))
        return lhs, ent(table.probs, F)


@dataclass
class FactorizationReport:
    """Largest ratio found; a lower bound on the optimal constant."""

    functional: str
    measured_C_lower: float
    num_functions: int
    skipped: int
    worst_f: np.ndarray = field(repr=False)
    theorem_C: float | None = None
    sampled: bool = False
    ratios: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "functional": self.functional,
            "measured_C_lower": self.measured_C_lower,
            "num_functions": self.num_functions,
            "skipped": self.skipped,
            "theorem_C": self.theorem_C,
            "sampled": self.sampled,
            "worst_f": self.worst_f.tolist(),
        }


def hill_climb(ratio_fn: Callable[[np.ndarray], np.ndarray], F0: np.ndarray, rng: np.random.Generator, steps: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Multiplicative random-coordinate ascent on a ratio, batched over columns.

    Each step multiplies a random subset of coordinates of every column by
    ``exp(s Z)`` and keeps the change where the ratio improved; step sizes
    adapt per column.
    """
    F = np.array(F0, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    F = np.where(F > 0, F, 1e-6 * max(F.max(), 1e-300))
    best = ratio_fn(F)
    best = np.where(np.isnan(best), -np.inf, best)
    s = np.full(F.shape[1], 0.5)
    N = F.shape[0]
    for _ in range(steps):
        frac = rng.uniform(0.05, 0.5)
        mask = rng.random(F.shape) < frac
        Z = rng.standard_normal(F.shape) * s[None, :]
        G = F * np.exp(np.where(mask, Z, 0.0))
        G /= G.mean(axis=0, keepdims=True)
        r = ratio_fn(G)
        r = np.where(np.isnan(r), -np.inf, r)
        up = r > best
        F[:, up] = G[:, up]
        best = np.where(up, r, best)
        s = np.clip(np.where(up, s * 1.3, s * 0.8), 1e-3, 5.0)
    return F, best


def measure_factorization(
    table: GibbsTable,
    functional: Functional,
    fs: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    num_random: int = 2000,
    climb_top: int = 8,
    climb_steps: int = 200,
    theorem_C: float | None = None,
) -> FactorizationReport:
    """Largest ``lhs / rhs`` over a batch of test functions plus a local ascent.

    ``fs`` (``(N, K)``) are always included; ``num_random`` random functions
    are added, and the best ``climb_top`` starts are refined.
    """
    rng = rng or np.random.default_rng(0)
    parts = []
    if fs is not None:
        parts.append(np.asarray(fs, dtype=float).reshape(table.N, -1))
    if num_random:
        parts.append(random_functions(table.N, num_random, rng))
    F = np.concatenate(parts, axis=1)
    r = functional.ratios(table, F)
    skipped = int(np.isnan(r).sum())
    rr = np.where(np.isnan(r), -np.inf, r)
    best_i = int(np.argmax(rr))
    best, witness = float(rr[best_i]), F[:, best_i].copy()
    if climb_top and climb_steps and np.isfinite(best):
        order = np.argsort(-rr)[:climb_top]
        order = order[np.isfinite(rr[order])]
        if len(order):
            G, gr = hill_climb(lambda X: functional.ratios(table, X), F[:, order], rng, climb_steps)
            j = int(np.argmax(gr))
            if gr[j] > best:
                best, witness = float(gr[j]), G[:, j].copy()
    sampled = bool(getattr(functional, "sampled", False))
    return FactorizationReport(functional.name, best, F.shape[1], skipped, witness, theorem_C, sampled, r)


def brascamp_lieb_check(table: GibbsTable, C: float, phis: np.ndarray) -> dict:
    """Evaluate ``mu(prod_x phi_x(sigma_x)) <= prod_x mu(|phi_x(sigma_x)|^C)^(1/C)``.

    ``phis`` is an ``(n, q)`` array of single-site functions.
    """
    if C < 1:
        raise ValueError("Brascamp-Lieb exponent must be >= 1")
    S = table.states
    vals = phis[np.arange(table.n)[None, :], S]
    lhs = float(table.probs @ vals.prod(axis=1))
    rhs = 1.0
    for x in range(table.n):
        rhs *= float(table.probs @ np.abs(vals[:, x]) ** C) ** (1.0 / C)
    return {"lhs": lhs, "rhs": rhs, "margin": rhs - lhs, "holds": lhs <= rhs + 1e-12}


# --------------------------------------------------------------------------
# Dirichlet forms, MLSI, decay, gap, mixing


def dirichlet_form(kernel: Kernel, table: GibbsTable, f: np.ndarray, g: np.ndarray) -> dict:
    """``<f, (1 - P) g>_mu`` together with the half-sum form for reversible ``P``."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    mu = table.probs
    val = float(mu @ (f * (g - kernel.apply(table, g))))
    P = kernel.matrix(table).tocoo()
    w = mu[P.row] * P.data
    half = 0.5 * float(np.sum(w * (f[P.row] - f[P.col]) * (g[P.row] - g[P.col])))
    return {"value": val, "sum_form": half, "residual": abs(val - half)}


def _dirichlet_batch(kernel: Kernel, table: GibbsTable, F: np.ndarray, G: np.ndarray) -> np.ndarray:
    return table.probs @ (F * (G - kernel.apply(table, G)))


def mlsi_check(kernel: Kernel, table: GibbsTable, rho: float, F: np.ndarray, lsi: float | None = None) -> dict:
    """Check ``D(f, log f) >= rho Ent f`` (and optionally ``D(sqrt f, sqrt f) >= s Ent f``)."""
    F, _ = _cols(F)
    if np.any(F <= 0):
        raise ValueError("MLSI check needs strictly positive f")
    E = ent(table.probs, F)
    Dm = _dirichlet_batch(kernel, table, F, np.log(F))
    margins = Dm - rho * E
    out = {"rho": rho, "min_margin": float(margins.min()), "holds": bool(margins.min() >= -1e-12), "margins": margins}
    if lsi is not None:
        R = np.sqrt(F)
        Dl = _dirichlet_batch(kernel, table, R, R)
        lm = Dl - lsi * E
        out.update(lsi=lsi, lsi_min_margin=float(lm.min()), lsi_holds=bool(lm.min() >= -1e-12))
    return out


def adjoint_apply(kernel: Kernel, table: GibbsTable, F: np.ndarray) -> np.ndarray:
    """Density of ``nu P`` w.r.t. ``mu`` when ``nu = f mu`` (batched)."""
    mu = table.probs
    if kernel.reversible:
        return kernel.apply(table, F)
    F, single = _cols(F)
    P = kernel.matrix(table)
    G = (P.T @ (mu[:, None] * F)) / mu[:, None]
    return G[:, 0] if single else G


def entropy_contraction_ratios(kernel: Kernel, table: GibbsTable, F: np.ndarray) -> np.ndarray:
    """``H(nu P | mu) / H(nu | mu)`` for densities ``f`` (columns of ``F``)."""
    F, _ = _cols(F)
    num = ent(table.probs, adjoint_apply(kernel, table, F))
    den = ent(table.probs, F)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / den
    r[den < DEGENERATE_ENT] = np.nan
    return r


def _second_singular_sq(kernel: Kernel, table: GibbsTable) -> float:
    """Largest ``||P* phi||^2 / ||phi||^2`` over ``phi`` orthogonal to constants in ``L2(mu)``."""
    mu = table.probs
    P = kernel.dense(table)
    s = np.sqrt(mu)
    A = s[:, None] * P / s[None, :]
    A = A - np.outer(s, s)
    sv = np.linalg.svd(A, compute_uv=False)
    return float(sv[0] ** 2) if len(sv) else 0.0


@dataclass
class DecayReport:
    """Numerical entropy-decay estimate; ``delta`` is an upper bound on the true rate."""

    delta: float
    best_ratio: float
    local_ratio: float
    starts: int
    converged: int
    witness: np.ndarray = field(repr=False)


def entropy_decay_rate(kernel: Kernel, table: GibbsTable, rng: np.random.Generator | None = None, starts: int = 12, random_batch: int = 2000) -> DecayReport:
    """Estimate ``delta = 1 - sup_nu H(nu P | mu) / H(nu | mu)``.

    The supremum is approached three ways: a random batch of densities,
    multi-start L-BFGS on ``f = exp(theta)``, and the small-perturbation
    limit ``f = 1 + eps phi`` whose ratio tends to the squared second
    singular value of ``P`` in ``L2(mu)``.
    """
    rng = rng or np.random.default_rng(0)
    mu = table.probs
    N = table.N
    P = kernel.matrix(table)
    PT = P.T.tocsr()

    def pstar(f):
        return (PT @ (mu * f)) / mu

    def obj(theta):
        # floor keeps f > 0 so the log stays finite
        f = np.exp(np.maximum(theta - theta.max(), -700.0))
        m = mu @ f
        g = pstar(f)
        lf = np.log(f / m)
        with np.errstate(divide="ignore"):
            lg = np.log(np.maximum(g, 1e-300) / m)
        D = mu @ (f * lf)
        Nn = mu @ (g * lg)
        if D < 1e-14:
            return 0.0, np.zeros_like(theta)
        dD = mu * lf
        dN = mu * (P @ lg)
        grad_f = (dN * D - Nn * dD) / D**2
        return -Nn / D, -grad_f * f

    F = random_functions(N, random_batch, rng)
    r = entropy_contraction_ratios(kernel, table, F)
    rr = np.where(np.isnan(r), -np.inf, r)
    order = np.argsort(-rr)
    best = float(rr[order[0]]) if len(rr) else 0.0
    witness = F[:, order[0]].copy()
    conv = 0
    inits = [np.log(np.maximum(F[:, i], 1e-8)) for i in order[: starts // 2]]
    inits += [rng.standard_normal(N) * rng.uniform(0.5, 3.0) for _ in range(starts - len(inits))]
    for th0 in inits:
        res = minimize(obj, th0, jac=True, method="L-BFGS-B", options={"maxiter": 500})
        conv += int(res.success)
        f = np.exp(res.x - res.x.max())
        val = entropy_contraction_ratios(kernel, table, f)
        val = float(val[0]) if not np.isnan(val[0]) else -np.inf
        if val > best:
            best, witness = val, f
    local = _second_singular_sq(kernel, table) if N <= 4000 else float("nan")
    sup = max(best, local if np.isfinite(local) else -np.inf, 0.0)
    return DecayReport(1.0 - sup, best, local, len(inits), conv, witness)


def spectral_gap(kernel: Kernel, table: GibbsTable) -> float:
    """``1 - lambda_2`` of a reversible kernel (exact symmetric eigen-solve)."""
    mu = table.probs
    P = kernel.dense(table)
    s = np.sqrt(mu)
    S = s[:, None] * P / s[None, :]
    S = 0.5 * (S + S.T)
    vals = np.linalg.eigvalsh(S)
    return float(1.0 - vals[-2]) if len(vals) > 1 else 1.0


@dataclass
class MixingResult:
    t_mix: int
    tv_curve: list[float]


def exact_mixing_time(kernel: Kernel, table: GibbsTable, max_steps: int = 100000) -> MixingResult:
    """Smallest ``t`` with worst-start total variation to ``mu`` at most 1/4."""
    mu = table.probs
    P = kernel.matrix(table)
    D = np.eye(table.N)
    curve = []
    for t in range(max_steps + 1):
        tv = 0.5 * float(np.abs(D - mu[None, :]).sum(axis=1).max())
        curve.append(tv)
        if tv <= 0.25:
            return MixingResult(t, curve)
        D = np.asarray(P.T @ D.T).T
    raise RuntimeError(f"mixing time exceeds {max_steps}")


def mixing_bound(delta: float, mu_star: float) -> float:
    """``1 + (1/delta)(log 8 + log log(1/mu_*))``."""
    return 1.0 + (math.log(8.0) + math.log(math.log(1.0 / mu_star))) / delta


# --------------------------------------------------------------------------
# local-to-global recursion


def alpha_theory(eta: float, b: float, n: int) -> np.ndarray:
    """``alpha_k = max{1 - 2 eta / (b (n - k - 1)), 0}`` for ``k = 0..n-2``."""
    k = np.arange(n - 1)
    return np.maximum(1.0 - 2.0 * eta / (b * (n - k - 1)), 0.0)


def kappa_sequence(alpha: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``Gamma_i = prod_{k<i} alpha_k`` (i = 0..n-1) and ``kappa_j`` (j = 0..n-1)."""
    n = len(alpha) + 1
    G = np.ones(n)
    for i in range(1, n):
        G[i] = G[i - 1] * alpha[i - 1]
    total = G.sum()
    kappa = np.array([G[j:].sum() / total for j in range(n)])
    return G, kappa


def kappa_lower(n: int, ell: int, R: int) -> float:
    """``(n-l-1)...(n-l-R) / ((n-1)...(n-R))`` (zero when a factor vanishes)."""
    num = 1.0
    den = 1.0
    for i in range(1, R + 1):
        num *= max(n - ell - i, 0)
        den *= n - i
    return num / den if den > 0 else 0.0


def _pair_terms(table: GibbsTable, idx: np.ndarray, free: list[int], F: np.ndarray):
    """Single- and pair-conditioned entropies of ``f`` under one pinned measure."""
    p = table.probs[idx]
    p = p / p.sum()
    S = table.states[idx]
    Fi = F[idx]
    q = table.q
    single = {}
    for x in free:
        fb = Fibers(S[:, x].astype(np.int64), p)
        single[x] = ent(p, fb.expect(Fi))
    pair = {}
    for x, y in itertools.combinations(free, 2):
        fb = Fibers(S[:, x].astype(np.int64) * q + S[:, y], p)
        pair[(x, y)] = ent(p, fb.expect(Fi))
    return single, pair


@dataclass
class RecursionReport:
    eta: float
    b: float
    alpha: np.ndarray
    Gamma: np.ndarray
    kappa: np.ndarray
    R: int
    local_min_margin: float
    lemma_min_margin: float
    global_min_margin: float
    ubf_min_margin: float
    pinnings_checked: int
    functions: int
    sampled: bool = False


def recursion_quantities(table: GibbsTable, eta: float, b: float, F: np.ndarray, pinnings=None) -> RecursionReport:
    """Check the local inequality, its global consequences and the UBF bound.

    * local: ``(1 + alpha_k) Av_x Ent(mu^{tau,x} f) <= Av_{x,y} Ent(mu^{tau,x,y} f)``
      for every pinning ``tau`` (``|U| = k <= n - 2``);
    * ``Av_{|U|=j} Ent(mu^U f) <= (1 - kappa_j) Ent f`` for ``j = 1..n-1``;
    * ``(n/l) Av_{|U|=l} Ent(mu^U f) <= (R + 1) Ent f`` with ``R = ceil(2 eta / b)``;
    * ``(l/n) Ent f <= (l / (n kappa_{n-l})) Av_{|L|=l} mu[Ent_L f]``.

    Margins are ``rhs - lhs``; functions with ``Ent f`` below the
    degeneracy threshold are dropped.
    """
    from .gibbs import iter_pinnings

    if table.pinning.items:
        raise ValueError("recursion checks start from the unpinned measure")
    F, _ = _cols(F)
    p = table.probs
    E = ent(p, F)
    keep = E >= DEGENERATE_ENT
    F, E = F[:, keep], E[keep]
    n = table.n
    alpha = alpha_theory(eta, b, n)
    Gamma, kappa = kappa_sequence(alpha)
    R = int(math.ceil(2 * eta / b - 1e-12))

    local_min = np.inf
    count = 0
    for tau, idx in pinnings if pinnings is not None else iter_pinnings(table):
        k = len(tau)
        if k > n - 2:
            continue
        count += 1
        free = [v for v in range(n) if v not in set(tau.vertices)]
        single, pair = _pair_terms(table, idx, free, F)
        av1 = sum(single.values()) / len(free)
        av2 = sum(pair.values()) / len(pair)
        marg = av2 - (1 + alpha[k]) * av1
        local_min = min(local_min, float(marg.min()))

    lemma_min = np.inf
    global_min = np.inf
    ubf_min = np.inf
    for j in range(1, n):
        subs = list(itertools.combinations(range(n), j))
        av = sum(ent(p, given(table, U, F)) for U in subs) / len(subs)
        lemma_min = min(lemma_min, float(((1 - kappa[j]) * E - av).min()))
        global_min = min(global_min, float(((R + 1) * E - (n / j) * av).min()))
        ell = n - j
        kap = kappa[n - ell]
        if kap > 0:
            avL = sum(conditional_entropy_avg(table, L, F) for L in itertools.combinations(range(n), ell)) / math.comb(n, ell)
            lhs = (ell / n) * E
            rhs = (ell / (n * kap)) * avL
            ubf_min = min(ubf_min, float((rhs - lhs).min()))
    return RecursionReport(eta, b, alpha, Gamma, kappa, R, local_min, lemma_min, global_min, ubf_min, count, F.shape[1])


def pinsker_variance_bound(table: GibbsTable, x: int, F: np.ndarray, b: float | None = None) -> dict:
    """Check ``Var(mu^x f) <= (2/b) Ent(mu^x f)`` after normalising ``mu f = 1``.

    ``b`` defaults to the smallest positive single-site marginal of the
    table's free vertices.
    """
    F, _ = _cols(F)
    p = table.probs
    m = p @ F
    ok = m > 0
    F = F[:, ok] / m[ok]
    if b is None:
        marg = table.marginals[list(table.free)]
        b = float(marg[marg > 0].min())
    h = given(table, [x], F)
    var = variance(p, h)
    en = ent(p, h)
    margin = (2.0 / b) * en - var
    return {"b": b, "var": var, "ent": en, "margin": margin, "min_margin": float(margin.min()), "holds": bool(margin.min() >= -1e-12)}


# --------------------------------------------------------------------------
# identities and inequalities for block entropies


def decomposition_residual(table: GibbsTable, L, F: np.ndarray) -> np.ndarray:
    """``Ent f - mu[Ent_L f] - Ent(mu_L f)`` (zero)."""
    p = table.probs
    return ent(p, F) - conditional_entropy_avg(table, L, F) - ent(p, block_average(table, L, F))


def telescoping_residual(table: GibbsTable, chain: Sequence, F: np.ndarray) -> np.ndarray:
    """``sum_i mu[Ent_{L_i}(mu_{L_{i-1}} f)] - mu[Ent_{L_w}(mu_{L_0} f)]`` for nested ``L_0 < ... < L_w`` (zero)."""
    total = 0.0
    for prev, cur in zip(chain[:-1], chain[1:]):
        total = total + conditional_entropy_avg(table, cur, block_average(table, prev, F))
    return total - conditional_entropy_avg(table, chain[-1], block_average(table, chain[0], F))


def monotonicity_margin(table: GibbsTable, A, B, F: np.ndarray) -> np.ndarray:
    """``mu[Ent_B f] - mu[Ent_A f]`` for ``A`` inside ``B`` (nonnegative)."""
    if not set(A) <= set(B):
        raise ValueError("A must be a subset of B")
    return conditional_entropy_avg(table, B, F) - conditional_entropy_avg(table, A, F)


def shearer_margin(table: GibbsTable, L, alpha: BlockWeights, F: np.ndarray) -> np.ndarray:
    """``sum_B alpha_B mu[Ent_B f] - delta(alpha) mu[Ent_L f]`` for ``alpha`` on subsets of ``L``.

    Nonnegative when the conditional law on ``L`` is a product.
    """
    L = set(L)
    if any(not set(b) <= L for b in alpha.blocks):
        raise ValueError("blocks must lie inside L")
    cov = np.zeros(table.n)
    for b, w in zip(alpha.blocks, alpha.probs):
        cov[list(b)] += w
    delta = float(cov[sorted(L)].min())
    rhs = sum(w * conditional_entropy_avg(table, b, F) for b, w in zip(alpha.blocks, alpha.probs))
    return rhs - delta * conditional_entropy_avg(table, L, F)


def product_factorization(table: GibbsTable, A, B, U, F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """For ``L = A + B`` with product law across ``A`` and ``B``, and ``U`` inside ``B``.

    Returns the residual ``mu[Ent_L(mu_B f)] - mu[Ent_A(mu_B f)]`` (zero)
    and the margin ``mu[Ent_A(mu_U f)] - mu[Ent_A(mu_B f)]`` (nonnegative).
    """
    A, B, U = set(A), set(B), set(U)
    if A & B or not U <= B:
        raise ValueError("need disjoint A, B and U inside B")
    gB = block_average(table, B, F)
    resid = conditional_entropy_avg(table, A | B, gB) - conditional_entropy_avg(table, A, gB)
    margin = conditional_entropy_avg(table, A, block_average(table, U, F)) - conditional_entropy_avg(table, A, gB)
    return resid, margin
