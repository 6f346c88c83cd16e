"""Run every JSON experiment config in a directory and summarize.

    python scripts/run_configs.py configs --out results
"""

from __future__ import annotations

import argparse
from pathlib import Path

from spinlab.harness import ConfigError, ExperimentConfig, run, write_report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("directory", nargs="?", default="configs")
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    worst = 0
    for path in sorted(Path(args.directory).glob("*.json")):
        try:
            cfg = ExperimentConfig.load(path)
        except (ConfigError, KeyError, TypeError):
            continue  # not an experiment config (e.g. flip parameters)
        rep = run(cfg)
        write_report(rep, out / f"{cfg.name}.json", out / f"{cfg.name}.csv")
        failed = sum(not c.passed for c in rep.checks)
        print(f"{cfg.name:>24}: checks={len(rep.checks)} failed={failed} errors={len(rep.errors)} exit={rep.exit_code}")
        worst = max(worst, rep.exit_code)
    raise SystemExit(worst)


if __name__ == "__main__":
    main()
