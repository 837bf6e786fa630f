"""Run every figure scenario, write CSV/JSON outputs and print the anchor report.

    python3 scripts/reproduce_figures.py [--config run.toml] [--out results] [--plots]
"""
import argparse
import sys
from pathlib import Path

from twinsense.config import load_config
from twinsense.experiments import SCENARIOS, run_scenario


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path)
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--workers", type=int)
    ap.add_argument("--plots", action="store_true", help="also emit matplotlib scripts")
    args = ap.parse_args()

    cfg = load_config(args.config)
    failed = 0
    for name in SCENARIOS:
        res = run_scenario(name, cfg, workers=args.workers)
        res.write(args.out, plot_scripts=args.plots)
        print(f"== {name}")
        for anchor in res.anchors:
            print("  " + anchor.line())
        failed += len(res.failures())
    print(f"\n{failed} gating anchor(s) failed; outputs in {args.out}/")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
