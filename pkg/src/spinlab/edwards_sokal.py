"""Joint spin-edge measure of the ferromagnetic Potts model.

For ``p = 1 - exp(-beta)`` the joint measure on pairs ``(sigma, A)`` with
``A`` a set of monochromatic edges of ``sigma`` has weight
``p^|A| (1-p)^(|E|-|A|)``.  Its spin marginal is the Potts measure and its
edge marginal is the random-cluster measure.  Swendsen-Wang is the
composition of the two conditional resampling steps.

Edge sets are bit masks over ``graph.edges`` (bit ``e`` set iff edge ``e``
is kept).  Conventions for the partition function: the joint sum equals
the Potts partition function written with interaction
``exp(-beta 1(sigma_u != sigma_v))``; with interaction
``exp(beta 1(sigma_u == sigma_v))`` it is smaller by ``exp(beta |E|)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .dynamics import _potts_beta
from .entropy import DEGENERATE_ENT, Functional, _cols, cond_ent, ent, entropy_contraction_ratios, measure_factorization
from .fibers import Fibers, projection_codes
from .gibbs import GibbsTable, _normalise, enumerate_table
from .model import CapExceeded, Partition, SpinSystem, build_model


@dataclass(frozen=True, eq=False)
class JointTable:
    """Exact joint spin-edge measure.

    Attributes:
        spin_table: the Potts table whose states index the spin coordinate.
        p: edge retention probability ``1 - exp(-beta)``.
        spin_index: row of ``spin_table`` for each joint state.
        edge_mask: kept-edge bit mask for each joint state.
        log_weights: unnormalised log-weights ``|A| log p + (|E|-|A|) log(1-p)``.
    """

    spin_table: GibbsTable
    beta: float
    p: float
    spin_index: np.ndarray
    edge_mask: np.ndarray
    log_weights: np.ndarray
    log_partition: float = field(init=False)
    probs: np.ndarray = field(init=False)

    def __post_init__(self):
        log_z, pr = _normalise(self.log_weights)
        object.__setattr__(self, "log_partition", log_z)
        object.__setattr__(self, "probs", pr)

    @property
    def N(self) -> int:
        return len(self.spin_index)

    @property
    def num_edges(self) -> int:
        return self.spin_table.system.graph.m

    @cached_property
    def spins(self) -> np.ndarray:
        return self.spin_table.states[self.spin_index]

    @cached_property
    def edge_bits(self) -> np.ndarray:
        """``(N, |E|)`` 0/1 array of kept edges."""
        m = self.num_edges
        return ((self.edge_mask[:, None] >> np.arange(m, dtype=np.int64)[None, :]) & 1).astype(np.int8)

    def _cache(self) -> dict:
        return self.__dict__.setdefault("_fiber_cache", {})

    def spin_fibers(self) -> Fibers:
        """Groups of joint states sharing ``sigma``."""
        c = self._cache()
        if "spin" not in c:
            c["spin"] = Fibers(self.spin_index, self.probs)
        return c["spin"]

    def edge_fibers(self) -> Fibers:
        """Groups of joint states sharing ``A``."""
        c = self._cache()
        if "edge" not in c:
            c["edge"] = Fibers(self.edge_mask, self.probs)
        return c["edge"]

    def outside_fibers(self, V, with_edges: bool = False) -> Fibers:
        """Groups sharing the spins off ``V`` (and ``A`` when ``with_edges``)."""
        key = ("out", tuple(sorted(V)), with_edges)
        c = self._cache()
        if key not in c:
            n, q = self.spin_table.n, self.spin_table.q
            rest = [v for v in range(n) if v not in set(V)]
            lab = projection_codes(self.spins, rest, q)
            if with_edges:
                lab = lab * (np.int64(1) << self.num_edges) + self.edge_mask
            c[key] = Fibers(lab, self.probs)
        return c[key]

    def lift(self, f: np.ndarray) -> np.ndarray:
        """Joint function ``(sigma, A) -> f(sigma)``."""
        return np.asarray(f, dtype=float)[self.spin_index]

    def spin_marginal(self) -> np.ndarray:
        return np.bincount(self.spin_index, weights=self.probs, minlength=self.spin_table.N)

    def edge_marginal(self) -> dict[int, float]:
        fb = self.edge_fibers()
        return {int(a): float(m) for a, m in zip(fb.labels, fb.mass)}


def enumerate_joint(sys_or_table: SpinSystem | GibbsTable, cap: int = 1 << 22) -> JointTable:
    """Enumerate the joint measure, subsets of ``M(sigma)`` only.

    Joint states of zero mass (``A`` nonempty when ``beta = 0``) are omitted.
    """
    table = sys_or_table if isinstance(sys_or_table, GibbsTable) else enumerate_table(sys_or_table)
    if table.pinning.items:
        raise ValueError("joint measure is defined for the unpinned model")
    sys = table.system
    beta = _potts_beta(sys)
    g = sys.graph
    m = g.m
    p = -math.expm1(-beta)
    eu = np.array([u for u, _ in g.edges], dtype=np.intp)
    ev = np.array([v for _, v in g.edges], dtype=np.intp)
    mono = (table.states[:, eu] == table.states[:, ev]) if m else np.zeros((table.N, 0), bool)
    sizes = mono.sum(axis=1)
    total = int(np.sum(2 ** sizes.astype(np.int64))) if p > 0 else table.N
    if total > cap:
        raise CapExceeded(f"{total} joint states exceed cap {cap}")

    idx_parts, mask_parts, k_parts = [], [], []
    for i in range(table.N):
        bits = np.flatnonzero(mono[i]).astype(np.int64)
        if p > 0:
            sub = np.arange(1 << len(bits), dtype=np.int64)
            sel = (sub[:, None] >> np.arange(len(bits), dtype=np.int64)[None, :]) & 1
            masks = sel @ (np.int64(1) << bits) if len(bits) else np.zeros(1, np.int64)
            ks = sel.sum(axis=1)
        else:
            masks, ks = np.zeros(1, np.int64), np.zeros(1, np.int64)
        idx_parts.append(np.full(len(masks), i, dtype=np.intp))
        mask_parts.append(masks)
        k_parts.append(ks)
    idx = np.concatenate(idx_parts)
    masks = np.concatenate(mask_parts)
    ks = np.concatenate(k_parts).astype(float)
    lw = np.zeros(len(ks))
    if p > 0:
        lw += ks * math.log(p)
    if p < 1:
        lw += (m - ks) * math.log1p(-p)
    return JointTable(table, beta, p, idx, masks, lw)


def potts_log_partition_disagreement(sys: SpinSystem) -> float:
    """``log Z`` of the same Potts model written with ``exp(-beta 1(!=))`` interactions.

    Built as an independent general model and enumerated from scratch.
    """
    beta = _potts_beta(sys)
    q = sys.q
    A = np.exp(-beta * (1.0 - np.eye(q)))
    other = build_model("general", sys.graph, q=q, interaction=A)
    return enumerate_table(other).log_partition


def random_cluster_weights(sys: SpinSystem) -> dict[int, float]:
    """Unnormalised random-cluster weight ``q^c(A) p^|A| (1-p)^(|E|-|A|)`` of every ``A``."""
    beta = _potts_beta(sys)
    g, n, q, m = sys.graph, sys.n, sys.q, sys.graph.m
    p = -math.expm1(-beta)
    out = {}
    for a in range(1 << m):
        kept = [g.edges[e] for e in range(m) if a >> e & 1]
        k = len(kept)
        w = p**k * (1 - p) ** (m - k)
        if w == 0:
            continue
        if kept:
            r = [u for u, _ in kept]
            c = [v for _, v in kept]
            G = sp.csr_matrix((np.ones(k), (r, c)), shape=(n, n))
            comps = connected_components(G, directed=False)[0]
        else:
            comps = n
        out[a] = q**comps * w
    return out


def consistency_checks(joint: JointTable) -> dict:
    """Normalisation, spin marginal and partition-function residuals."""
    sys = joint.spin_table.system
    z_dis = potts_log_partition_disagreement(sys)
    return {
        "normalisation": abs(math.fsum(joint.probs.tolist()) - 1.0),
        "spin_marginal": float(np.abs(joint.spin_marginal() - joint.spin_table.probs).max()),
        "log_partition_joint": joint.log_partition,
        "log_partition_potts": z_dis,
        "log_partition_residual": abs(joint.log_partition - z_dis),
        "shifted_residual": abs(joint.spin_table.log_partition - joint.beta * sys.graph.m - joint.log_partition),
    }


def sw_step_composition(table: JointTable | GibbsTable) -> sp.csr_matrix:
    """Swendsen-Wang matrix on spin states as spin->edge then edge->spin resampling."""
    joint = table if isinstance(table, JointTable) else enumerate_joint(table)
    spin = joint.spin_table
    nu = joint.probs
    mu = spin.probs
    T1 = sp.csr_matrix(
        (nu / mu[joint.spin_index], (joint.spin_index, np.arange(joint.N))), shape=(spin.N, joint.N)
    )
    T2 = _edge_to_spin(joint)
    return (T1 @ T2).tocsr()


def _edge_to_spin(joint: JointTable) -> sp.csr_matrix:
    """Rows: joint states; row ``(sigma, A)`` is ``nu(sigma' | A)`` over spin states."""
    ef = joint.edge_fibers()
    nu = joint.probs
    # per A-fibre spin law, as (G x spin_N)
    W = sp.csr_matrix((nu / ef.mass[ef.inverse], (ef.inverse, joint.spin_index)), shape=(ef.G, joint.spin_table.N))
    lift = sp.csr_matrix((np.ones(joint.N), (np.arange(joint.N), ef.inverse)), shape=(joint.N, ef.G))
    return (lift @ W).tocsr()


# --------------------------------------------------------------------------
# functionals on the joint space


class SpinEdgeFactorization(Functional):
    """``Ent f <= C (nu[Ent(f | sigma)] + nu[Ent(f | A)])``."""

    name = "spin_edge"

    def terms(self, joint, F):
        p = joint.probs
        rhs = cond_ent(p, joint.spin_fibers(), F) + cond_ent(p, joint.edge_fibers(), F)
        return ent(p, F), rhs


def spin_edge_factorization(joint: JointTable, fs: np.ndarray | None = None, rng=None, num_random: int = 2000, **kw):
    """Measured spin/edge constant; lower bound over the batch plus ascent."""
    return measure_factorization(joint, SpinEdgeFactorization(), fs=fs, rng=rng, num_random=num_random, **kw)


@dataclass
class JointPartiteChecks:
    """Per-function terms of the class-by-class argument on the joint space.

    ``delta1`` and ``delta2`` are the smallest observed ratios, i.e. the
    largest constants consistent with the tested functions.
    """

    k: int
    delta1: float
    delta2: float
    monotone_min_margin: float
    composed_min_margin: float
    ent: np.ndarray = field(repr=False)
    spin_term: np.ndarray = field(repr=False)
    edge_term: np.ndarray = field(repr=False)
    delta1_ratios: np.ndarray = field(repr=False)
    delta2_ratios: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "delta1": self.delta1,
            "delta2": self.delta2,
            "monotone_min_margin": self.monotone_min_margin,
            "composed_min_margin": self.composed_min_margin,
        }


def kpartite_joint_checks(joint: JointTable, partition: Partition, F: np.ndarray) -> JointPartiteChecks:
    """Evaluate the three class-wise inequalities and their composition.

    For each class ``V_j``:

    * ``nu[Ent(f | A)] >= nu[Ent(f | sigma off V_j, A)]`` (monotonicity);
    * ``nu[Ent(f | sigma)] + nu[Ent(f | sigma off V_j, A)] >= d1 nu[Ent(f | sigma off V_j)]``;
    * ``sum_j nu[Ent(f | sigma off V_j)] >= d2 Ent f``;

    and then ``spin + edge >= (d1 d2 / k) Ent f`` with the measured ``d1, d2``.
    """
    partition.validate(joint.spin_table.system.graph)
    F, _ = _cols(F)
    p = joint.probs
    E = ent(p, F)
    keep = E >= DEGENERATE_ENT
    F, E = F[:, keep], E[keep]
    spin_t = cond_ent(p, joint.spin_fibers(), F)
    edge_t = cond_ent(p, joint.edge_fibers(), F)
    k = len(partition.classes)
    mono = np.inf
    d1 = []
    tot = np.zeros(F.shape[1])
    for V in partition.classes:
        out = cond_ent(p, joint.outside_fibers(V), F)
        out_a = cond_ent(p, joint.outside_fibers(V, with_edges=True), F)
        mono = min(mono, float((edge_t - out_a).min()) if F.shape[1] else np.inf)
        ok = out > DEGENERATE_ENT
        d1.append(np.where(ok, (spin_t + out_a) / np.where(ok, out, 1.0), np.inf))
        tot += out
    d1 = np.stack(d1) if d1 else np.zeros((0, F.shape[1]))
    d2r = tot / E
    delta1 = float(d1.min()) if d1.size else np.inf
    delta2 = float(d2r.min()) if d2r.size else np.inf
    composed = spin_t + edge_t - (delta1 * delta2 / k) * E
    return JointPartiteChecks(
        k, delta1, delta2, mono, float(composed.min()) if composed.size else np.inf, E, spin_t, edge_t, d1, d2r
    )


def sw_decay_check(joint: JointTable, C: float, F: np.ndarray) -> dict:
    """``H(nu P_SW | mu) <= (1 - 1/C) H(nu | mu)`` for densities ``f`` on spin space."""
    from .dynamics import swendsen_wang

    spin = joint.spin_table
    K = swendsen_wang(spin.system)
    F, _ = _cols(F)
    before = ent(spin.probs, F)
    r = entropy_contraction_ratios(K, spin, F)
    after = np.where(np.isnan(r), 0.0, r) * before
    margin = (1.0 - 1.0 / C) * before - after
    return {"C": C, "min_margin": float(margin.min()), "holds": bool(margin.min() >= -1e-8), "max_ratio": float(np.nanmax(r))}
