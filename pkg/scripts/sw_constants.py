"""Measured spin/edge factorization constants and Swendsen-Wang decay.

For zero-field ferromagnetic Potts models on small graphs, enumerates the
joint spin-edge measure and reports the measured spin/edge constant C, the
class-wise constants delta1 and delta2, the composed bound k / (delta1
delta2), the numerically certified one-step entropy decay rate and the exact
mixing time of Swendsen-Wang.

    python scripts/sw_constants.py --q 2,3 --betas 0.2,0.4,0.8
"""

from __future__ import annotations

import argparse

import numpy as np

from spinlab import dynamics as dyn
from spinlab import edwards_sokal as es
from spinlab import entropy as ent
from spinlab import graphs
from spinlab.gibbs import enumerate_table
from spinlab.harness import parse_grid
from spinlab.model import build_model, greedy_partition
from spinlab.seeding import stream

GRAPHS = {
    "C4": graphs.cycle(4),
    "P4": graphs.path(4),
    "K4-e": graphs.remove_edge(graphs.complete(4), 0, 1),
}


def measure(g, q, beta, seed, functions):
    sys_ = build_model("potts", g, q=q, beta=beta)
    T = enumerate_table(sys_)
    J = es.enumerate_joint(T)
    rng = stream(seed, "sw_constants", q, beta)
    Fs = ent.random_functions(T.N, functions, rng, p=T.probs)
    Fj = np.concatenate([J.lift(Fs), ent.random_functions(J.N, functions // 2, rng, p=J.probs)], axis=1)
    C = es.spin_edge_factorization(J, fs=Fj, rng=rng, num_random=0).measured_C_lower
    kc = es.kpartite_joint_checks(J, greedy_partition(g), Fj)
    K = dyn.swendsen_wang(sys_)
    dec = ent.entropy_decay_rate(K, T, rng=rng)
    return {
        "C": C,
        "delta1": kc.delta1,
        "delta2": kc.delta2,
        "composed": kc.k / (kc.delta1 * kc.delta2),
        "decay": dec.delta,
        "t_mix": ent.exact_mixing_time(K, T).t_mix,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--q", default="2,3")
    ap.add_argument("--betas", default="0.2,0.4")
    ap.add_argument("--functions", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(f"{'graph':>6} {'q':>2} {'beta':>5} {'C':>9} {'delta1':>9} {'delta2':>9} {'k/d1d2':>9} {'decay':>9} {'t_mix':>5}")
    for name, g in GRAPHS.items():
        for q in parse_grid(args.q, integer=True):
            for beta in parse_grid(args.betas):
                r = measure(g, q, beta, args.seed, args.functions)
                print(f"{name:>6} {q:>2} {beta:>5.2f} {r['C']:9.4f} {r['delta1']:9.4f} {r['delta2']:9.4f} {r['composed']:9.4f} {r['decay']:9.4f} {r['t_mix']:>5}")


if __name__ == "__main__":
    main()
