#!/usr/bin/env python3
"""Run the five verification experiments at paper-scale settings and write
reports under results/.

Usage: python scripts/run_experiments.py [--quick] [--seed N] [--workers W]

--quick cuts replication counts by 10x for a fast smoke pass.
"""

import argparse
import json
import time
from pathlib import Path

from levydiff.stable_env import StableLawSpec
from levydiff.verify import (EXPERIMENTS, corollary_limsup_experiment,
                             scaling_experiment, theorem_cvloi_experiment,
                             theorem_cvptfav_experiment,
                             valley_law_experiment, write_observables_csv)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--seed", type=int, default=309)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    q = 10 if args.quick else 1
    trend = StableLawSpec(2.0, 0.0, 2.5, seed=args.seed)
    neg = StableLawSpec(1.5, -1.0, 1.0, seed=args.seed)
    sym = StableLawSpec(1.5, 0.0, 1.0, seed=args.seed)
    gauss = StableLawSpec(2.0, 0.0, 0.5, seed=args.seed)
    cs = [4.0, 8.0, 12.0]

    jobs = [
        ("scaling", lambda: scaling_experiment(
            gauss, c=2.0, n=max(60, 1000 // q), step_h=0.05,
            workers=args.workers)),
        ("valley-law-neg", lambda: valley_law_experiment(
            neg, c=3.0, n_env=max(60, 5000 // q), step_h=0.01,
            workers=args.workers)),
        ("valley-law-sym", lambda: valley_law_experiment(
            sym, c=1.0, n_env=max(60, 5000 // q), step_h=0.01,
            workers=args.workers)),
        ("cvptfav", lambda: theorem_cvptfav_experiment(
            trend, cs, 1.0, max(20, 200 // q), step_h=0.1,
            workers=args.workers)),
        ("limsup", lambda: corollary_limsup_experiment(
            trend, cs, max(30, 300 // q), step_h=0.1, workers=args.workers)),
        ("cvloi", lambda: theorem_cvloi_experiment(
            trend, cs, [-1.0, 0.0, 1.0], max(30, 300 // q), step_h=0.1,
            workers=args.workers)),
    ]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, job in jobs:
        t0 = time.time()
        report, rows = job()
        (out / f"{name}.report.json").write_text(report.to_json())
        with open(out / f"{name}.observables.csv", "w") as fh:
            write_observables_csv(rows, fh)
        print(f"{name}: verdict={'pass' if report.verdict else 'fail'} "
              f"failures={report.failures} ({time.time() - t0:.0f}s)")
    print(f"reports in {out}/")


if __name__ == "__main__":
    main()
