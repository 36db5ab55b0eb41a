"""Which task does the pair phase credit?  A check by simulation.

After both single-resource jobs of a two-resource system start together, the
one that finishes first has been "served" by the pair phase and the other
survives.  With rates (3, 1) the slow job survives three times out of four.
This script compares two readings of that split against LTDF simulation:

* ``rate-share``: the first task wins with probability rate_1 / (rate_1 + rate_2)
  (the law ``reduce`` uses), and
* ``swapped``: the opposite assignment.

For each requirement vector it prints the feasibility margin under both
readings and whether LTDF met every requirement.  A reading is contradicted
when it reports a clear violation (margin <= -0.02) for a vector that
simulation meets.

    python3 scripts/reduction_check.py [--frames 100000]
"""

import argparse
import sys

import numpy as np

from rtspn import reduction
from rtspn.feasibility import check
from rtspn.model import EveryFrame, SystemSpec, TaskSpec, validate_spec
from rtspn.simulator import coupled_run, run
from rtspn.stats import batch_means


def system(rates, reqs):
    res = [frozenset("A"), frozenset("B"), frozenset("AB")]
    tasks = tuple(TaskSpec(i + 1, r, q, s) for i, (r, q, s) in enumerate(zip(rates, reqs, res)))
    return validate_spec(SystemSpec(tasks, frozenset("AB"), 1.0, EveryFrame()))


def swapped_margin(spec):
    original = reduction.ReducedSystem.first_wins
    reduction.ReducedSystem.first_wins = lambda self: 1.0 - original(self)
    try:
        return check(spec).margin
    finally:
        reduction.ReducedSystem.first_wins = original


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--frames", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=3)
    args = p.parse_args()

    rates = (3.0, 1.0, 1.5)
    spec = system(rates, (0.0, 0.0, 0.0))
    cm = coupled_run(spec, reduction.reduce(spec), "ltdf", args.frames, seed=args.seed)
    freq, se = batch_means(cm.first_outlasts.astype(float))
    print(f"Pr[task 1 job outlasts task 2 job] = {freq:.4f} +- {se:.4f}"
          f"  (rate-share law: {rates[1] / (rates[0] + rates[1]):.4f})")

    print("q1,q2,q3,margin_rate_share,margin_swapped,ltdf_met")
    contradicted = {"rate-share": 0, "swapped": 0}
    for q1 in np.linspace(0.5, 0.9, 9):
        reqs = (float(q1), 0.1, 0.3)
        s = system(rates, reqs)
        m_rs, m_sw = check(s).margin, swapped_margin(s)
        met = bool(run(s, "ltdf", args.frames, seed=args.seed).met().all())
        contradicted["rate-share"] += int(met and m_rs <= -0.02)
        contradicted["swapped"] += int(met and m_sw <= -0.02)
        print(f"{q1:.2f},{reqs[1]},{reqs[2]},{m_rs:.4f},{m_sw:.4f},{int(met)}")
    print(f"# contradicted points: {contradicted}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
