"""Command-line entry point: ``spinlab run | sweep | gen-graph``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .graphs import generate, write_graph
from .harness import ConfigError, ExperimentConfig, parse_grid, run, sweep, write_report
from .model import SpinModelError

EXIT_CONFIG = 2


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = int(args.seed)
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    out = Path(args.output or cfg.output.get("json") or f"{cfg.name}.json")
    csv_path = args.csv or cfg.output.get("csv") or out.with_suffix(".csv")
    report = run(cfg)
    write_report(report, out, csv_path)
    failed = [c for c in report.checks if not c.passed]
    for c in report.checks:
        flag = "PASS" if c.passed else "FAIL"
        tag = " (sampled)" if c.sampled else ""
        print(f"{flag} {c.suite}/{c.name}{tag} margin={c.margin}")
    for e in report.errors:
        print(f"ERROR {e['suite']}: {e['error']}", file=sys.stderr)
    if report.advisory_code:
        print(f"advisory: {sum(c.sampled for c in failed)} sampled check(s) failed (code {report.advisory_code})", file=sys.stderr)
    if cfg.sampled_policy == "strict" and report.exit_code == 0 and report.advisory_code:
        return report.advisory_code
    return report.exit_code


def cmd_sweep(args) -> int:
    cfg = _load(args)
    integer = args.param in ("q", "n")
    grid = parse_grid(args.grid, integer=integer)
    out_dir = Path(args.output or f"{cfg.name}_sweep_{args.param}")
    rows = sweep(cfg, args.param, grid, out_dir)
    for r in rows:
        print(f"{args.param}={r['value']} eta={r['eta']} kappa={r['kappa']} delta={r['delta']} t_mix={r['t_mix']} {r['error']}")
    return 0 if all(r["exit_code"] == 0 for r in rows) else 1


def cmd_gen_graph(args) -> int:
    g = generate(args.family, args.params)
    write_graph(g, args.output)
    print(f"wrote {args.family} graph with n={g.n}, m={g.m} to {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spinlab", description="Exact verification suites for spin-system Markov chains.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the suites of a config")
    r.add_argument("config")
    r.add_argument("--seed", type=int, default=None, help="override the config's root seed")
    r.add_argument("-o", "--output", help="JSON report path")
    r.add_argument("--csv", help="CSV summary path")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a config over a parameter grid")
    s.add_argument("config")
    s.add_argument("--param", required=True, choices=["beta", "q", "n", "family", "lam"])
    s.add_argument("--grid", required=True, help="a:s:b (inclusive) or a comma list")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("-o", "--output", help="output directory")
    s.set_defaults(func=cmd_sweep)

    g = sub.add_parser("gen-graph", help="write a generated graph file")
    g.add_argument("family")
    g.add_argument("params", nargs="*")
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_gen_graph)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SpinModelError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
