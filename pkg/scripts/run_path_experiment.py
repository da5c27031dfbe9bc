"""Run the path-solver agreement experiment and print the report.

Usage:
    python3 scripts/run_path_experiment.py --structure AZ2 --trials 200 \
        --seed 7 --trace-dir /tmp/traces
"""

import argparse
import sys
from pathlib import Path

from symcsp.workbench import ExperimentConfig, run_experiment


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--structure", default="AZ2")
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--length-min", type=int, default=2)
    ap.add_argument("--length-max", type=int, default=10)
    ap.add_argument("--density", type=float, default=0.55)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trace-dir")
    args = ap.parse_args()

    if args.trace_dir:
        Path(args.trace_dir).mkdir(parents=True, exist_ok=True)
    cfg = ExperimentConfig(structure=args.structure, trials=args.trials,
                           length_min=args.length_min,
                           length_max=args.length_max, density=args.density,
                           seed=args.seed, trace_dir=args.trace_dir)
    report = run_experiment(cfg)
    print(report.canonical_text(), end="")
    print(report.timing_text())
    total = len(report.verdicts)
    disagreements = sum(total - c for c in report.agreement_matrix().values())
    print(f"disagreements: {disagreements}")
    return 0 if disagreements == 0 and not report.errors else 2


if __name__ == "__main__":
    sys.exit(main())
