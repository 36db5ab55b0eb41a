"""Two-resource verdict versus LTDF simulation on a requirement grid.

Scales the requirement vector of ``scripts/specs/two_resource.json`` and,
per grid point, prints the feasibility margin, the verdict and whether LTDF
met every requirement.

    python3 scripts/two_resource_grid.py [--lo 1.6 --hi 2.6 --steps 11]
"""

import argparse
import sys

import numpy as np

from rtspn.feasibility import check
from rtspn.model import load_spec
from rtspn.rng import split
from rtspn.simulator import run


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--spec", default="scripts/specs/two_resource.json")
    p.add_argument("--lo", type=float, default=1.6)
    p.add_argument("--hi", type=float, default=2.6)
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--frames", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=10)
    args = p.parse_args()

    base = load_spec(args.spec)
    print("scale,margin,status," + ",".join(f"q_hat_{n}" for n in base.task_ids) + ",met")
    for i, s in enumerate(np.linspace(args.lo, args.hi, args.steps)):
        spec = base
        for t in base.tasks:
            spec = spec.with_task(t.id, requirement=t.requirement * s)
        v = check(spec)
        m = run(spec, "ltdf", args.frames, seed=split(args.seed, i))
        q = ",".join(f"{x:.4f}" for x in m.throughput())
        print(f"{s:.3f},{v.margin:.4f},{v.status},{q},{int(m.met().all())}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
