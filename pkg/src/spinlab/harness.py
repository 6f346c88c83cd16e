"""Experiment configs, verification suites and report emission.

A suite takes a :class:`Context` (one spin system plus options) and returns
a list of :class:`Check` records.  Each record carries the measured value,
the bound it is compared against, the margin ``bound - measured`` (or an
explicit residual), a tolerance and a pass flag that can be recomputed from
the serialised numbers.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import contraction as ctr
from . import dynamics as dyn
from . import edwards_sokal as es
from . import entropy as ent
from . import gibbs, seeding
from .graphs import load_model
from .model import EMPTY, Partition, Pinning, SpinModelError, SpinSystem, greedy_partition
from .transport import hamming, random_equivalent_metric, weighted_hamming

CAP_ENV = {
    "states": "SPINLAB_STATE_CAP",
    "pinnings": "SPINLAB_PINNING_CAP",
    "pairs": "SPINLAB_PAIR_CAP",
}
DEFAULT_CAPS = {"states": 1 << 20, "pinnings": 20000, "pairs": 1500}


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# config and report


@dataclass
class ExperimentConfig:
    """One model, an ordered list of suites, caps, a root seed and outputs."""

    model: dict
    suites: list[str] = field(default_factory=list)
    caps: dict = field(default_factory=dict)
    seed: int = 0
    output: dict = field(default_factory=dict)
    sampled_policy: str = "advisory"
    options: dict = field(default_factory=dict)
    name: str = "experiment"
    base: Path | None = None

    def __post_init__(self):
        unknown = [s for s in self.suites if s not in SUITES]
        if unknown:
            raise ConfigError(f"unknown suites {unknown}; available: {sorted(SUITES)}")
        caps = dict(DEFAULT_CAPS)
        caps.update(self.caps)
        for k, env in CAP_ENV.items():
            if os.environ.get(env):
                caps[k] = int(os.environ[env])
        if any(int(v) <= 0 for v in caps.values()):
            raise ConfigError("caps must be positive")
        self.caps = {k: int(v) for k, v in caps.items()}
        if self.sampled_policy not in ("advisory", "strict"):
            raise ConfigError("sampled_policy is 'advisory' or 'strict'")
        if not 0 <= int(self.seed) < 1 << 64:
            raise ConfigError("seed must fit in 64 bits")
        self.seed = int(self.seed)

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> "ExperimentConfig":
        known = {"model", "suites", "caps", "seed", "output", "sampled_policy", "options", "name"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        if "model" not in d:
            raise ConfigError("config needs a model")
        return cls(base=base, **d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        p = Path(path)
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: {exc}") from exc
        return cls.from_dict(data, base=p.parent)

    def build_system(self) -> SpinSystem:
        return load_model(self.model, self.base)


@dataclass
class Check:
    """One verified (or descriptive) quantity.

    ``passed`` is ``margin >= -tol`` unless the check is descriptive
    (``margin`` is ``None``), in which case it is always ``True``.
    """

    name: str
    suite: str
    inputs: dict
    measured: dict
    bound: float | None
    margin: float | None
    tol: float
    sampled: bool = False
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.margin is None or bool(self.margin >= -self.tol)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "suite": self.suite,
            "inputs": self.inputs,
            "measured": self.measured,
            "bound": self.bound,
            "margin": self.margin,
            "tol": self.tol,
            "passed": self.passed,
            "sampled": self.sampled,
            "note": self.note,
        }


@dataclass
class Report:
    name: str
    seed: int
    model: dict
    checks: list[Check] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)
    runtime: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        """0 iff every non-sampled check passes and no suite errored."""
        bad = any(not c.passed and not c.sampled for c in self.checks) or bool(self.errors)
        return 1 if bad else 0

    @property
    def advisory_code(self) -> int:
        """Nonzero when some sampled check failed."""
        return 3 if any(not c.passed and c.sampled for c in self.checks) else 0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "model": self.model,
            "exit_code": self.exit_code,
            "advisory_code": self.advisory_code,
            "checks": [c.to_dict() for c in self.checks],
            "errors": self.errors,
        }


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    return x


def _fmt_float(v: float) -> str:
    if math.isnan(v):
        return '"nan"'
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    return format(v, ".17g")


def dumps17(obj, indent: int = 1, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits."""
    obj = _clean(obj)
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {dumps17(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(dumps17(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps17(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    return json.dumps(obj)


def write_report(report: Report, json_path, csv_path=None) -> None:
    """Write the deterministic JSON report, a CSV summary and a runtime sidecar."""
    jp = Path(json_path)
    jp.parent.mkdir(parents=True, exist_ok=True)
    jp.write_text(dumps17(report.to_dict()) + "\n")
    Path(str(jp) + ".timing.json").write_text(dumps17(report.runtime) + "\n")
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["suite", "name", "bound", "margin", "tol", "passed", "sampled"])
            for c in report.checks:
                w.writerow([c.suite, c.name, _csvf(c.bound), _csvf(c.margin), _csvf(c.tol), int(c.passed), int(c.sampled)])


def _csvf(v):
    return "" if v is None else format(float(v), ".17g")


# --------------------------------------------------------------------------
# context


@dataclass
class Context:
    system: SpinSystem
    options: dict
    caps: dict
    seed: int
    _table: gibbs.GibbsTable | None = None
    _cache: dict = field(default_factory=dict)

    @property
    def table(self) -> gibbs.GibbsTable:
        if self._table is None:
            self._table = gibbs.enumerate_table(self.system, cap=self.caps["states"])
        return self._table

    def rng(self, *path) -> np.random.Generator:
        return seeding.stream(self.seed, *path)

    def opt(self, suite: str, key: str, default):
        return self.options.get(suite, {}).get(key, default)

    def exhaustive_pinnings(self) -> bool:
        return gibbs.count_pinnings(self.table) <= self.caps["pinnings"]

    def eta(self) -> gibbs.SweepResult:
        if "eta" not in self._cache:
            self._cache["eta"] = gibbs.spectral_independence(self.table, self.caps["pinnings"], self.rng("eta"))
        return self._cache["eta"]

    def b(self) -> gibbs.SweepResult:
        if "b" not in self._cache:
            self._cache["b"] = gibbs.marginal_bound(self.table, self.caps["pinnings"], self.rng("b"))
        return self._cache["b"]


def _check(name, suite, measured, bound, margin, tol, inputs=None, sampled=False, note="") -> Check:
    return Check(name, suite, inputs or {}, measured, bound, margin, tol, sampled, note)


def _is_sw_model(sys: SpinSystem) -> bool:
    try:
        dyn._potts_beta(sys)
        return True
    except SpinModelError:
        return False


def _flip_params(ctx: Context) -> dyn.FlipParams:
    p = ctx.options.get("flip_params")
    if p is None:
        return DEFAULT_FLIP
    if isinstance(p, str):
        return dyn.FlipParams.load(p)
    return dyn.FlipParams(tuple(p["p"]), p.get("source", ""))


DEFAULT_FLIP = dyn.FlipParams(
    (1.0, 13 / 42, 1 / 6, 2 / 21, 1 / 21, 1 / 84),
    "flip probabilities of the classical colouring flip chain for q >= 11 Delta / 6",
)


def _kernels(ctx: Context, rng) -> list[dyn.Kernel]:
    sys = ctx.system
    out = [dyn.glauber(sys), dyn.block_dynamics(sys, dyn.random_block_weights(sys.n, rng))]
    if sys.kind == "colorings":
        out.append(dyn.flip_dynamics(sys, _flip_params(ctx)))
    if _is_sw_model(sys):
        out.append(dyn.swendsen_wang(sys))
    return out


# --------------------------------------------------------------------------
# suites


def suite_exactness(ctx: Context) -> list[Check]:
    T = ctx.table
    S = "exactness"
    out = [_check("normalisation", S, {"residual": abs(math.fsum(T.probs.tolist()) - 1.0)}, 0.0, -abs(math.fsum(T.probs.tolist()) - 1.0), 1e-12)]
    J = gibbs.influence_matrix(T)
    m = np.array([T.marginals[x, a] for x, a in J.index])
    W = m[:, None] * J.entries
    asym = float(np.abs(W - W.T).max()) if W.size else 0.0
    out.append(_check("influence_self_adjoint", S, {"residual": asym}, 0.0, -asym, 1e-12))
    for K in _kernels(ctx, ctx.rng(S, "alpha")):
        P = K.matrix(T, check=False)
        rows = float(np.abs(np.asarray(P.sum(axis=1)).ravel() - 1.0).max())
        neg = float(min(P.data.min(), 0.0)) if P.nnz else 0.0
        tv = 0.5 * float(np.abs(P.T @ T.probs - T.probs).sum())
        F = (P.multiply(T.probs[:, None])).tocsr()
        db = float(abs(F - F.T).max()) if F.nnz else 0.0
        out.append(_check(f"{K.name}_row_sums", S, {"residual": rows, "min_entry": neg}, 0.0, -max(rows, -neg), 1e-11))
        out.append(_check(f"{K.name}_stationarity", S, {"tv": tv}, 0.0, -tv, 1e-10))
        out.append(_check(f"{K.name}_detailed_balance", S, {"residual": db}, 0.0, -db, 1e-10))
    return out


def _metrics(ctx: Context):
    sys = ctx.system
    rng = ctx.rng("metrics")
    ms = [("hamming", hamming(), "glauber_weighted")]
    for k in range(int(ctx.opt("contraction_si", "weight_draws", 3))):
        w = rng.uniform(0.5, 2.0, size=sys.n)
        ms.append((f"weighted_{k}", weighted_hamming(w), "glauber_weighted"))
    gamma = float(ctx.opt("contraction_si", "gamma", 1.5))
    m = random_equivalent_metric(sys.n, sys.q, gamma, rng)
    ms.append((f"custom_gamma_{gamma}", m, "glauber_gamma"))
    return ms


def suite_contraction_si(ctx: Context) -> list[Check]:
    S = "contraction_si"
    T = ctx.table
    sys = ctx.system
    sampled = not ctx.exhaustive_pinnings()
    pins = list(gibbs.sample_pinnings(T, ctx.caps["pinnings"], ctx.rng(S, "pins")) if sampled else gibbs.iter_pinnings(T))
    lam = {}
    for tau, idx in pins:
        sub = T if not tau.items else T.subtable(idx, tau)
        free = sub.free
        if len(free) < 2:
            lam[sub.pinning.items] = 0.0
        else:
            lam[sub.pinning.items] = gibbs.lambda1(gibbs.influence_matrix(sub))
    eta = max(lam.values())
    out = []
    for label, metric, kind in _metrics(ctx):
        pc = ctr.measure_kappa_pinned(lambda tau: dyn.glauber(sys, tau), T, metric, "all_pairs", pins, ctx.caps["pairs"])
        inputs = {"metric": label, "gamma": metric.gamma, "n": sys.n}
        if pc.kappa >= 1:
            out.append(_check(f"eta_bound[{label}]", S, {"kappa": pc.kappa, "eta": eta}, None, None, 0.0, inputs, sampled, "kappa >= 1: hypothesis not met"))
            continue
        pred = ctr.predicted_eta(kind, pc.kappa, n=sys.n, gamma=metric.gamma)
        out.append(_check(f"eta_bound[{label}]", S, {"kappa": pc.kappa, "eta": eta, "witness": pc.witness.to_io()}, pred, pred - eta, 1e-8, inputs, sampled))
        worst = np.inf
        for key, k in pc.per_pinning.items():
            if k < 1:
                worst = min(worst, ctr.predicted_eta(kind, k, n=sys.n, gamma=metric.gamma) - lam[key])
        out.append(_check(f"eta_bound_per_pinning[{label}]", S, {"pinnings": len(pc.per_pinning)}, None, float(worst), 1e-8, inputs, sampled))
    return out


def suite_dobrushin_si(ctx: Context) -> list[Check]:
    S = "dobrushin_si"
    sys = ctx.system
    T = ctx.table
    R = gibbs.dobrushin_matrix(sys)
    info = ctr.dobrushin_eta_bound(R)
    eta = ctx.eta()
    out = []
    meas = {"rho": info["rho"], "rho_upper": info["rho_upper"], "eps": info["eps"], "eta": eta.value}
    if info["eps"] <= 0:
        out.append(_check("eta_bound", S, meas, None, None, 0.0, sampled=eta.sampled, note="rho(R) >= 1: hypothesis not met"))
    else:
        out.append(_check("eta_bound", S, meas, info["eta_bound"], info["eta_bound"] - eta.value, 1e-8, sampled=eta.sampled))
    k = int(ctx.opt(S, "pinnings", 50))
    worst = np.inf
    for tau, _ in itertools.islice(gibbs.sample_pinnings(T, k, ctx.rng(S, "pins")), k):
        r = gibbs.spectral_radius(gibbs.dobrushin_matrix(sys, tau)).value
        worst = min(worst, info["rho"] - r)
    out.append(_check("pinned_radius_monotone", S, {"rho": info["rho"], "pinnings": k}, info["rho"], float(worst), 1e-9, sampled=True))
    if info["eps"] > 0 and ctx.opt(S, "weighted_contraction", True):
        wres = ctr.dobrushin_contraction_weights(R, 0.0)
        if wres is not None:
            w, _ = wres
            eps_w = 1.0 - float(np.max((R @ w) / w))
            if eps_w > 0:
                pc = ctr.measure_kappa_pinned(lambda tau: dyn.glauber(sys, tau), T, weighted_hamming(w), "all_pairs", None, ctx.caps["pairs"])
                bound = 1.0 - eps_w / sys.n
                out.append(_check("weighted_glauber_contraction", S, {"kappa": pc.kappa, "eps_w": eps_w}, bound, bound - pc.kappa, 1e-9))
    return out


def _glauber_kappa(ctx: Context, metric=None) -> float:
    key = ("kappa", getattr(metric, "label", "hamming"))
    if key not in ctx._cache:
        ctx._cache[key] = ctr.measure_kappa(dyn.glauber(ctx.system), ctx.table, metric or hamming(), "all_pairs", ctx.caps["pairs"]).kappa
    return ctx._cache[key]


def suite_stein(ctx: Context) -> list[Check]:
    S = "stein"
    sys = ctx.system
    T = ctx.table
    rng = ctx.rng(S)
    kappa = _glauber_kappa(ctx)
    if kappa >= 1:
        return [_check("stein_bound", S, {"kappa": kappa}, None, None, 0.0, note="kappa >= 1: hypothesis not met")]
    J = gibbs.influence_matrix(T)
    pairs = list(J.index)
    cases = int(ctx.opt(S, "cases", 1000))
    draws = rng.integers(len(pairs), size=cases)
    P = dyn.glauber(sys)
    worst, worst_sign, sign_resid = np.inf, np.inf, 0.0
    for k in np.unique(draws):
        x, a = pairs[k]
        sub = T.restrict(Pinning(((x, a),)))
        setup = ctr.stein_setup(P, T, dyn.glauber(sys, sub.pinning), sub, hamming(), kappa)
        cnt = int((draws == k).sum())
        F = rng.standard_normal((T.N, cnt)) * rng.uniform(0.1, 3.0, size=cnt)
        res = ctr.verify_stein_bound(setup, F)
        worst = min(worst, float(res.margins.min()))
        f = ctr.sign_function(J, T, x, a)
        rs = ctr.verify_stein_bound(setup, f)
        S_xa = float(np.abs(J.entries[k]).sum())
        sign_resid = max(sign_resid, abs(float(rs.lhs[0]) - S_xa))
        worst_sign = min(worst_sign, float(rs.margins[0]))
    return [
        _check("stein_bound_random", S, {"kappa": kappa, "cases": cases}, None, worst, 1e-9),
        _check("stein_bound_sign", S, {"kappa": kappa, "pairs": len(np.unique(draws))}, None, worst_sign, 1e-9),
        _check("sign_function_identity", S, {"residual": sign_resid}, 0.0, -sign_resid, 1e-12),
    ]


def _random_subset(rng, pool, lo=1):
    pool = list(pool)
    k = int(rng.integers(lo, len(pool) + 1))
    return sorted(rng.choice(pool, size=k, replace=False).tolist())


def _independent_set(rng, graph, pool):
    order = list(rng.permutation(list(pool)))
    chosen = []
    for v in order:
        if all(not graph.has_edge(int(v), int(u)) for u in chosen):
            chosen.append(int(v))
    return sorted(chosen)


def suite_entropy_identities(ctx: Context) -> list[Check]:
    S = "entropy_identities"
    T = ctx.table
    g = ctx.system.graph
    rng = ctx.rng(S)
    draws = int(ctx.opt(S, "draws", 10000))
    batch = int(ctx.opt(S, "batch", 50))
    V = list(range(T.n))
    worst = {"decomposition": 0.0, "telescoping": 0.0, "monotonicity": np.inf, "shearer": np.inf, "product_identity": 0.0, "product_inequality": np.inf}
    for _ in range(max(1, draws // batch)):
        F = ent.random_functions(T.N, batch, rng, p=T.probs)
        L = _random_subset(rng, V)
        worst["decomposition"] = max(worst["decomposition"], float(np.abs(ent.decomposition_residual(T, L, F)).max()))
        perm = list(rng.permutation(V))
        cuts = sorted(set(rng.integers(0, T.n + 1, size=int(rng.integers(2, 5))).tolist()))
        chain = [sorted(perm[:c]) for c in cuts]
        if len(chain) >= 2:
            worst["telescoping"] = max(worst["telescoping"], float(np.abs(ent.telescoping_residual(T, chain, F)).max()))
        B = _random_subset(rng, V)
        A = _random_subset(rng, B, lo=0)
        worst["monotonicity"] = min(worst["monotonicity"], float(ent.monotonicity_margin(T, A, B, F).min()))
        L = _independent_set(rng, g, V)
        nb = int(rng.integers(1, 5))
        blocks = [frozenset(_random_subset(rng, L)) for _ in range(nb)]
        alpha = dyn.BlockWeights.from_mapping({b: float(w) for b, w in zip(blocks, rng.dirichlet(np.ones(nb)))}) if len(set(blocks)) == nb else dyn.BlockWeights((blocks[0],), (1.0,))
        worst["shearer"] = min(worst["shearer"], float(ent.shearer_margin(T, L, alpha, F).min()))
        A, B = _product_split(rng, g, V)
        if A and B:
            U = _random_subset(rng, B, lo=0)
            r, m = ent.product_factorization(T, A, B, U, F)
            worst["product_identity"] = max(worst["product_identity"], float(np.abs(r).max()))
            worst["product_inequality"] = min(worst["product_inequality"], float(m.min()))
    out = []
    for name in ("decomposition", "telescoping", "product_identity"):
        out.append(_check(name, S, {"max_residual": worst[name], "draws": draws}, 0.0, -worst[name], 1e-10))
    for name in ("monotonicity", "shearer", "product_inequality"):
        v = worst[name] if np.isfinite(worst[name]) else 0.0
        out.append(_check(name, S, {"min_margin": v, "draws": draws}, None, v, 1e-10))
    return out


def _product_split(rng, graph, V):
    """Disjoint ``A``, ``B`` with no edge between them."""
    A = _random_subset(rng, V)
    rest = [v for v in V if v not in A and all(not graph.has_edge(v, a) for a in A)]
    if not rest:
        return A, []
    return A, _random_subset(rng, rest)


def suite_recursion(ctx: Context) -> list[Check]:
    S = "recursion"
    T = ctx.table
    if ctx.system.n < 3:
        return []
    eta, b = ctx.eta(), ctx.b()
    F = ent.random_functions(T.N, int(ctx.opt(S, "functions", 1000)), ctx.rng(S), p=T.probs)
    r = ent.recursion_quantities(T, eta.value, b.value, F)
    sampled = eta.sampled or b.sampled
    meas = {"eta": eta.value, "b": b.value, "R": r.R, "alpha": r.alpha, "kappa": r.kappa}
    return [
        _check("local_inequality", S, meas, None, r.local_min_margin, 1e-9, sampled=sampled),
        _check("subset_average_bound", S, {}, None, r.lemma_min_margin, 1e-9, sampled=sampled),
        _check("global_bound", S, {"R_plus_1": r.R + 1}, float(r.R + 1), r.global_min_margin, 1e-9, sampled=sampled),
        _check("uniform_block_bound", S, {}, None, r.ubf_min_margin, 1e-9, sampled=sampled),
    ]


def suite_pinsker(ctx: Context) -> list[Check]:
    S = "pinsker"
    T = ctx.table
    rng = ctx.rng(S)
    total = int(ctx.opt(S, "functions", 10000))
    k = int(ctx.opt(S, "pinnings", 10))
    subs = []
    for tau, idx in itertools.islice(gibbs.sample_pinnings(T, k, rng), k):
        sub = T if not tau.items else T.subtable(idx, tau)
        if sub.free:
            subs.append(sub)
    per = max(1, -(-total // max(1, len(subs))))
    worst, cnt = np.inf, 0
    for sub in subs:
        F = ent.random_functions(sub.N, per, rng, p=sub.probs)
        x = int(rng.choice(sub.free))
        r = ent.pinsker_variance_bound(sub, x, F)
        worst = min(worst, r["min_margin"])
        cnt += F.shape[1]
    worst = worst if np.isfinite(worst) else 0.0
    return [_check("variance_entropy_bound", S, {"functions": cnt}, None, worst, 1e-10)]


def suite_block_decay(ctx: Context) -> list[Check]:
    S = "block_decay"
    sys = ctx.system
    T = ctx.table
    rng = ctx.rng(S)
    na = int(ctx.opt(S, "alphas", 5))
    nf = int(ctx.opt(S, "functions", 1000))
    alphas = [dyn.random_block_weights(sys.n, rng) for _ in range(na)]
    F = ent.random_functions(T.N, nf, rng, p=T.probs)
    rep = ent.measure_factorization(T, ent.BlockFactorization(alphas), fs=F, rng=rng, num_random=int(ctx.opt(S, "extra_random", 500)))
    C = rep.measured_C_lower
    wit_ratio = float(np.nanmax(ent.BlockFactorization(alphas).ratios(T, rep.worst_f[:, None])))
    out = [_check("gbf_witness", S, {"C": C, "witness_ratio": wit_ratio}, C, C - wit_ratio, 1e-10)]
    E = ent.ent(T.probs, F)
    mu_star = float(T.probs.min())
    for i, alpha in enumerate(alphas):
        K = dyn.block_dynamics(sys, alpha)
        d = dyn.coverage_delta(alpha, sys.n)
        PF = K.apply(T, F)
        after = ent.ent(T.probs, PF)
        drop = sum(w * ent.conditional_entropy_avg(T, b, F) for b, w in zip(alpha.blocks, alpha.probs))
        out.append(_check(f"entropy_drop[{i}]", S, {}, None, float((E - drop - after).min()), 1e-9))
        out.append(_check(f"contraction[{i}]", S, {"delta_alpha": d, "C": C}, None, float(((1 - d / C) * E - after).min()), 1e-9))
        dec = ent.entropy_decay_rate(K, T, rng=rng)
        rate = max(d / C, dec.delta)
        bound = ent.mixing_bound(rate, mu_star) if rate > 0 else np.inf
        t = ent.exact_mixing_time(K, T).t_mix
        meas = {"t_mix": t, "delta_alpha_over_C": d / C, "decay_rate": dec.delta, "rate_used": rate}
        out.append(_check(f"mixing_bound[{i}]", S, meas, bound, bound - t, 0.0))
    return out


def suite_spectral_gap(ctx: Context) -> list[Check]:
    S = "spectral_gap"
    sys = ctx.system
    T = ctx.table
    rng = ctx.rng(S)
    alphas = [("glauber", dyn.singletons(sys.n))]
    alphas += [(f"random_{i}", dyn.random_block_weights(sys.n, rng)) for i in range(int(ctx.opt(S, "alphas", 5)))]
    alphas += [("balls_1", dyn.ball_blocks(sys.graph, 1))]
    out = []
    for label, alpha in alphas:
        K = dyn.block_dynamics(sys, alpha)
        gap = ent.spectral_gap(K, T)
        d = dyn.coverage_delta(alpha, sys.n)
        out.append(_check(f"gap_vs_coverage[{label}]", S, {"gap": gap}, d, d - gap, 1e-9))
    return out


def suite_sw_chain(ctx: Context) -> list[Check]:
    S = "sw_chain"
    sys = ctx.system
    if not _is_sw_model(sys):
        return [_check("sw_applicable", S, {}, None, None, 0.0, note="not a zero-field ferromagnetic Potts model")]
    T = ctx.table
    rng = ctx.rng(S)
    J = es.enumerate_joint(T)
    cc = es.consistency_checks(J)
    out = [
        _check("joint_normalisation", S, {"residual": cc["normalisation"]}, 0.0, -cc["normalisation"], 1e-12),
        _check("spin_marginal", S, {"residual": cc["spin_marginal"]}, 0.0, -cc["spin_marginal"], 1e-11),
        _check("log_partition", S, {k: cc[k] for k in ("log_partition_joint", "log_partition_potts", "shifted_residual")}, 0.0, -cc["log_partition_residual"], 1e-10),
    ]
    K = dyn.swendsen_wang(sys)
    P = K.dense(T)
    tv = 0.5 * float(np.abs(T.probs @ P - T.probs).sum())
    Fm = T.probs[:, None] * P
    db = float(np.abs(Fm - Fm.T).max())
    diff = float(np.abs(P - dyn.sw_matrix_direct(T)).max())
    out += [
        _check("stationarity", S, {"tv": tv}, 0.0, -tv, 1e-10),
        _check("detailed_balance", S, {"residual": db}, 0.0, -db, 1e-10),
        _check("composition_equals_direct", S, {"max_diff": diff}, 0.0, -diff, 1e-12),
    ]
    nf = int(ctx.opt(S, "functions", 1000))
    Fs = ent.random_functions(T.N, nf, rng, p=T.probs)
    Fj = np.concatenate([J.lift(Fs), ent.random_functions(J.N, int(ctx.opt(S, "joint_functions", 500)), rng, p=J.probs)], axis=1)
    rep = es.spin_edge_factorization(J, fs=Fj, rng=rng, num_random=0)
    C = rep.measured_C_lower
    part = Partition(tuple(tuple(c) for c in ctx.options.get("partition", []))) if ctx.options.get("partition") else greedy_partition(sys.graph)
    kc = es.kpartite_joint_checks(J, part, Fj)
    composed_bound = kc.k / (kc.delta1 * kc.delta2)
    out += [
        _check("class_monotonicity", S, {"k": kc.k}, None, kc.monotone_min_margin, 1e-10),
        _check("composed_factorization", S, {"delta1": kc.delta1, "delta2": kc.delta2, "k": kc.k, "C_composed": composed_bound, "C_spin_edge": C}, None, kc.composed_min_margin, 1e-9),
    ]
    dc = es.sw_decay_check(J, C, Fs)
    out.append(_check("one_step_decay", S, {"C": C, "max_ratio": dc["max_ratio"]}, 1 - 1 / C, dc["min_margin"], 1e-8))
    dec = ent.entropy_decay_rate(K, T, rng=rng)
    t = ent.exact_mixing_time(K, T).t_mix
    bound = ent.mixing_bound(dec.delta, float(T.probs.min())) if dec.delta > 0 else np.inf
    out.append(_check("mixing", S, {"t_mix": t, "decay_rate": dec.delta, "rate_from_C": 1 / C}, bound, bound - t, 0.0))
    return out


def empirical_row(kernel: dyn.Kernel, table: gibbs.GibbsTable, start: np.ndarray, steps: int, rng, chunk: int = 100000) -> np.ndarray:
    """Frequencies of one-step outcomes from ``start`` over ``steps`` independent draws."""
    counts = np.zeros(table.N)
    done = 0
    while done < steps:
        m = min(chunk, steps - done)
        S = np.repeat(np.asarray(start, dtype=np.int8)[None, :], m, axis=0)
        out = kernel.sampler(S, rng)
        idx = table.index_of(out)
        if np.any(idx < 0):
            raise dyn.StationarityError(f"{kernel.name}: sampler left the state space")
        counts += np.bincount(idx, minlength=table.N)
        done += m
    return counts / steps


def suite_sampler_fidelity(ctx: Context) -> list[Check]:
    S = "sampler_fidelity"
    sys = ctx.system
    T = ctx.table
    rng = ctx.rng(S)
    steps = int(ctx.opt(S, "steps", 1000000))
    starts = int(ctx.opt(S, "starts", 3))
    kernels = [dyn.glauber(sys)]
    if sys.kind == "colorings":
        kernels.append(dyn.flip_dynamics(sys, _flip_params(ctx)))
    if _is_sw_model(sys):
        kernels.append(dyn.swendsen_wang(sys))
    out = []
    for K in kernels:
        P = K.matrix(T)
        worst = np.inf
        for s in rng.choice(T.N, size=min(starts, T.N), replace=False):
            row = P[int(s)].toarray().ravel()
            emp = empirical_row(K, T, T.states[int(s)], steps, ctx.rng(S, K.name, int(s)))
            sd = np.sqrt(row * (1 - row) / steps)
            allowed = 4 * sd
            worst = min(worst, float((allowed - np.abs(emp - row)).min()))
        out.append(_check(f"one_step_law[{K.name}]", S, {"steps": steps, "starts": starts}, None, worst, 0.0, sampled=True))
    return out


SUITES: dict[str, Callable[[Context], list[Check]]] = {
    "exactness": suite_exactness,
    "contraction_si": suite_contraction_si,
    "dobrushin_si": suite_dobrushin_si,
    "stein": suite_stein,
    "entropy_identities": suite_entropy_identities,
    "recursion": suite_recursion,
    "pinsker": suite_pinsker,
    "block_decay": suite_block_decay,
    "spectral_gap": suite_spectral_gap,
    "sw_chain": suite_sw_chain,
    "sampler_fidelity": suite_sampler_fidelity,
}


def run_suite(name: str, system: SpinSystem, options: dict | None = None, seed: int = 0, caps: dict | None = None) -> list[Check]:
    """Run one suite on one system (used by tests and scripts)."""
    c = dict(DEFAULT_CAPS)
    c.update(caps or {})
    return SUITES[name](Context(system, options or {}, c, seed))


def _resolve_paths(config: ExperimentConfig) -> dict:
    """Options with file references made relative to the config's directory."""
    opts = dict(config.options)
    fp = opts.get("flip_params")
    if isinstance(fp, str) and config.base is not None and not Path(fp).is_absolute():
        opts["flip_params"] = str(config.base / fp)
    return opts


def run(config: ExperimentConfig) -> Report:
    """Run the configured suites in order; suite failures are recorded, not raised."""
    report = Report(config.name, config.seed, config.model)
    if not config.suites:
        return report
    try:
        ctx = Context(config.build_system(), _resolve_paths(config), config.caps, config.seed)
    except Exception as exc:  # model construction failure
        report.errors.append({"suite": "model", "error": f"{type(exc).__name__}: {exc}"})
        return report
    for name in config.suites:
        t0 = time.perf_counter()
        try:
            report.checks.extend(SUITES[name](ctx))
        except Exception as exc:
            report.errors.append({"suite": name, "error": f"{type(exc).__name__}: {exc}"})
        report.runtime[name] = time.perf_counter() - t0
    return report


# --------------------------------------------------------------------------
# sweeps


def parse_grid(spec: str, integer: bool = False) -> list:
    """``"a:s:b"`` (inclusive) or a comma list."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError("grid is a:s:b")
        a, s, b = (float(x) for x in parts)
        if s <= 0:
            raise ConfigError("grid step must be positive")
        k = int(math.floor((b - a) / s + 1e-9))
        vals = [a + i * s for i in range(k + 1)]
        vals = [round(v, 12) for v in vals]
    else:
        vals = [v.strip() for v in spec.split(",") if v.strip()]
        if not integer and vals and all(_isnum(v) for v in vals):
            vals = [float(v) for v in vals]
    if integer:
        vals = [int(round(float(v))) for v in vals]
    if not vals:
        raise ConfigError("empty grid")
    return vals


def _isnum(s) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def _with_param(model: dict, param: str, value) -> dict:
    m = json.loads(json.dumps(model))
    if param in ("beta", "q", "lam", "lambda"):
        m.setdefault("params", {})[param] = value
    elif param == "n":
        if "graph" not in m:
            raise ConfigError("sweeping n needs a generated graph")
        m["graph"]["params"] = [value] + list(m["graph"]["params"][1:])
    elif param == "family":
        if "graph" not in m:
            raise ConfigError("sweeping family needs a generated graph")
        m["graph"]["family"] = value
    else:
        raise ConfigError(f"cannot sweep {param!r}")
    return m


def describe(system: SpinSystem, caps: dict, seed: int) -> dict:
    """Descriptive quantities for a sweep point: eta, Glauber kappa, decay rate, mixing time."""
    ctx = Context(system, {}, caps, seed)
    T = ctx.table
    K = dyn.glauber(system)
    row = {"eta": ctx.eta().value}
    try:
        row["kappa"] = ctr.measure_kappa(K, T, hamming(), "all_pairs", caps["pairs"]).kappa
    except ValueError:
        row["kappa"] = float("nan")
    row["delta"] = ent.entropy_decay_rate(K, T, rng=ctx.rng("sweep", "decay")).delta
    row["t_mix"] = ent.exact_mixing_time(K, T).t_mix
    return row


def sweep(config: ExperimentConfig, param: str, grid: list, out_dir) -> list[dict]:
    """One report per grid point plus a CSV of descriptive columns.

    Failures at a grid point are recorded in that point's row.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, v in enumerate(grid):
        model = _with_param(config.model, param, v)
        cfg = ExperimentConfig(model, config.suites, config.caps, config.seed, {}, config.sampled_policy, config.options, f"{config.name}[{param}={v}]", config.base)
        row = {"param": param, "value": v}
        try:
            rep = run(cfg)
            write_report(rep, out_dir / f"point_{i:03d}.json", out_dir / f"point_{i:03d}.csv")
            row.update(describe(cfg.build_system(), cfg.caps, cfg.seed))
            row["exit_code"] = rep.exit_code
            row["error"] = ""
        except Exception as exc:
            row.update({"eta": "", "kappa": "", "delta": "", "t_mix": "", "exit_code": 1, "error": f"{type(exc).__name__}: {exc}"})
        rows.append(row)
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        cols = ["param", "value", "eta", "kappa", "delta", "t_mix", "exit_code", "error"]
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow({k: (format(r[k], ".17g") if isinstance(r.get(k), float) else r.get(k, "")) for k in cols})
    return rows
