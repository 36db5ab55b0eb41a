"""Locate the single-task throughput ceiling by sweep and simulation.

One task with rate 1 and frame length 1 can complete at most 1 - e^-1 of its
jobs.  This sweeps the requirement across that value, prints the exact
verdict and the simulated throughput per grid point, and reports the
largest requirement that simulation still meets.

    python3 scripts/boundary_sweep.py [--frames 100000] [--seed 3]
"""

import argparse
import csv
import math
import sys

from rtspn.cli import ExperimentConfig, sweep
from rtspn.model import load_spec

SPEC = "scripts/specs/one_task.json"


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--spec", default=SPEC)
    p.add_argument("--start", type=float, default=0.55)
    p.add_argument("--stop", type=float, default=0.70)
    p.add_argument("--steps", type=int, default=16)
    p.add_argument("--frames", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=3)
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()

    spec = load_spec(args.spec)
    cfg = ExperimentConfig(
        command="sweep", spec_path=args.spec, param="requirement", task=spec.task_ids[0],
        start=args.start, stop=args.stop, steps=args.steps, simulate=True,
        frames=args.frames, seed=args.seed, jobs=args.jobs,
    )
    header, rows, complete = sweep(spec, cfg)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    met = [float(r[0]) for r in rows if r[-1] == 1]
    print(f"# simulated ceiling: {max(met) if met else float('nan'):.4f}"
          f"  (1 - e^-1 = {1 - math.exp(-1):.4f})", file=sys.stderr)
    return 0 if complete else 5


if __name__ == "__main__":
    sys.exit(main())
