"""Feasibility of timely-throughput requirements.

Single resource: requirements ``q`` are feasible iff for every subset S of
tasks, ``sum_{n in S} q_n / rate_n + E[I_S] <= T``.

Two resources: feasible iff the reduced single-resource system admits a
requirement vector that covers the original requirements once lifted back
and passes every subset check.  That is a small LP.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .idle import IdleEstimate, idle_time_expected, idle_time_monte_carlo
from .lp import EPS_LP, GE, LE, Infeasible, LinearProgram, LpNumericalFailure, Unbounded, lp_max
from .model import SystemSpec
from .reduction import ReducedSystem, reduce

MAX_TASKS = 20
MAX_LP_TASKS = 16
EPS_FEAS = 1e-9
MC_SIGMAS = 4.0

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNCERTAIN = "boundary_uncertain"


class NotSingleResource(ValueError):
    pass


class TooManyTasks(ValueError):
    pass


def implied_workload(q: float, rate: float) -> float:
    """Per-frame processing time a task needs to complete ``q`` jobs per frame."""
    return q / rate


def subsets(task_ids: Iterable[int], *, empty: bool = True):
    """All subsets as sorted tuples, by size then lexicographically."""
    ids = sorted(task_ids)
    for k in range(0 if empty else 1, len(ids) + 1):
        yield from itertools.combinations(ids, k)


@dataclass(frozen=True)
class SubsetSlack:
    subset: tuple[int, ...]
    workload: float
    idle: float
    idle_stderr: float
    frame_length: float
    uncertain: bool = False

    @property
    def load(self) -> float:
        return self.workload + self.idle

    @property
    def slack(self) -> float:
        return self.frame_length - self.load


@dataclass
class FeasibilityVerdict:
    feasible: bool
    status: str
    frame_length: float
    slack_table: list[SubsetSlack]
    violations: list[SubsetSlack] = field(default_factory=list)
    witness: dict[int, float] | None = None
    margin: float | None = None
    reduced: ReducedSystem | None = None

    @property
    def min_slack(self) -> float:
        """Smallest slack over nonempty subsets.

        For two-resource systems this is the best achievable one over all
        reduced requirement vectors (the margin LP optimum).
        """
        if self.margin is not None:
            return self.margin
        return min((row.slack for row in self.slack_table if row.subset), default=self.frame_length)

    def summary(self) -> str:
        lines = [f"verdict: {self.status}", f"min_slack: {self.min_slack:.9g}"]
        for v in self.violations:
            lines.append(
                f"violated subset {list(v.subset)}: load {v.load:.9g} > T {v.frame_length:g} (slack {v.slack:.9g})"
            )
        if self.witness is not None:
            lines.append("witness: " + ", ".join(f"q[{k}]={v:.9g}" for k, v in sorted(self.witness.items())))
        if self.reduced is not None:
            lines.append(
                "task_map: "
                + ", ".join(f"{k}->{list(v)}" for k, v in sorted(self.reduced.task_map.items()))
            )
        return "\n".join(lines)


def _idle(S, spec, idle: str, samples: int, seed: int) -> IdleEstimate:
    if idle == "analytic":
        return idle_time_expected(S, spec)
    if idle == "analytic_mc_fallback":
        return idle_time_expected(S, spec, fallback="monte_carlo", samples=samples, seed=seed)
    if idle == "monte_carlo":
        return idle_time_monte_carlo(S, spec, samples, seed)
    raise ValueError(f"unknown idle method {idle!r}")


def _tolerance(T: float, est: IdleEstimate) -> tuple[float, bool]:
    if est.is_analytic:
        return EPS_FEAS * T, False
    return MC_SIGMAS * est.std_error, True


def check_single_resource(
    spec: SystemSpec, *, idle: str = "analytic", samples: int = 200_000, seed: int = 0
) -> FeasibilityVerdict:
    """Subset-by-subset capacity check on a single-resource system.

    ``idle`` is ``"analytic"`` (exact, phase-type for repeated rates),
    ``"analytic_mc_fallback"`` or ``"monte_carlo"``.  Subsets whose sampled
    slack is within four standard errors of zero are reported as
    ``boundary_uncertain`` rather than decided.
    """
    if len(spec.resources) != 1 or any(t.resources != spec.resources for t in spec.tasks):
        raise NotSingleResource("every task must use the one shared resource")
    if len(spec.tasks) > MAX_TASKS:
        raise TooManyTasks(f"{len(spec.tasks)} tasks; subset enumeration capped at {MAX_TASKS}")
    T = spec.frame_length
    w = {t.id: implied_workload(t.requirement, t.rate) for t in spec.tasks}
    table, violations = [], []
    uncertain = False
    for S in subsets(spec.task_ids):
        est = _idle(S, spec, idle, samples, seed)
        tol, sampled = _tolerance(T, est)
        row = SubsetSlack(S, math.fsum(w[n] for n in S), est.value, est.std_error, T)
        if sampled and abs(row.slack) <= tol:
            row = SubsetSlack(S, row.workload, row.idle, row.idle_stderr, T, uncertain=True)
            uncertain = True
        elif row.slack < -tol:
            violations.append(row)
        table.append(row)
    status = INFEASIBLE if violations else (UNCERTAIN if uncertain else FEASIBLE)
    return FeasibilityVerdict(not violations, status, T, table, violations)


def _capacity_rows(reduced: ReducedSystem, idle: str, samples: int, seed: int):
    rs = reduced.spec
    rows = []
    for S in subsets(rs.task_ids, empty=False):
        rows.append((S, _idle(S, rs, idle, samples, seed)))
    return rows


def _build_lp(spec: SystemSpec, reduced: ReducedSystem, capacity, with_margin: bool) -> tuple[LinearProgram, list[int]]:
    ids = list(reduced.spec.task_ids)
    index = {n: i for i, n in enumerate(ids)}
    n_vars = len(ids) + (1 if with_margin else 0)
    objective = [0.0] * n_vars
    if with_margin:
        objective[-1] = 1.0
    else:
        objective[index[reduced.pair_star]] = 1.0
    nonneg = [True] * len(ids) + ([False] if with_margin else [])
    lp = LinearProgram(n_vars, objective, nonneg=nonneg)

    win = reduced.first_wins()
    a, b, c = reduced.first_star, reduced.second_star, reduced.pair_star
    row = [0.0] * n_vars
    row[index[c]], row[index[a]] = win, 1.0
    lp.add(row, GE, spec.task(a).requirement)
    row = [0.0] * n_vars
    row[index[c]], row[index[b]] = 1.0 - win, 1.0
    lp.add(row, GE, spec.task(b).requirement)
    for n in reduced.topology.pair_tasks:
        row = [0.0] * n_vars
        row[index[n]] = 1.0
        lp.add(row, GE, spec.task(n).requirement)

    T = spec.frame_length
    for S, est in capacity:
        row = [0.0] * n_vars
        for n in S:
            row[index[n]] = 1.0 / reduced.spec.task(n).rate
        if with_margin:
            row[-1] = 1.0
        lp.add(row, LE, T - est.value)
    return lp, ids


def check_two_resource(
    spec: SystemSpec, *, idle: str = "analytic", samples: int = 200_000, seed: int = 0
) -> FeasibilityVerdict:
    """Feasibility of a two-resource system through its reduced system.

    Solves two LPs over the reduced requirement vector: the first maximises
    the smallest subset slack (``margin``, negative when infeasible), the
    second maximises the pair-phase requirement over the feasible set and
    becomes the witness.
    """
    reduced = reduce(spec)
    if len(reduced.spec.tasks) > MAX_LP_TASKS:
        raise TooManyTasks(f"{len(reduced.spec.tasks)} reduced tasks; capped at {MAX_LP_TASKS}")
    T = spec.frame_length
    capacity = _capacity_rows(reduced, idle, samples, seed)
    margin_lp, ids = _build_lp(spec, reduced, capacity, with_margin=True)
    try:
        best = lp_max(margin_lp)
    except (Infeasible, Unbounded) as exc:
        raise LpNumericalFailure(f"margin LP failed: {type(exc).__name__}") from exc
    margin = best.value
    point = {n: float(best.x[i]) for i, n in enumerate(ids)}

    sampled = any(not est.is_analytic for _, est in capacity)
    tol = MC_SIGMAS * max(est.std_error for _, est in capacity) if sampled else max(EPS_LP, EPS_FEAS * T)
    witness = None
    if margin >= -tol:
        witness_lp, _ = _build_lp(spec, reduced, capacity, with_margin=False)
        try:
            sol = lp_max(witness_lp)
            point = {n: max(float(sol.x[i]), 0.0) for i, n in enumerate(ids)}
            witness = point
        except Infeasible:
            # margin within tolerance of zero but the exact LP misses it
            witness = None

    table, violations = [], []
    for S, est in capacity:
        workload = math.fsum(point[n] / reduced.spec.task(n).rate for n in S)
        row = SubsetSlack(S, workload, est.value, est.std_error, T)
        if row.slack < -tol:
            violations.append(row)
        table.append(row)
    if sampled and abs(margin) <= tol:
        status = UNCERTAIN
    elif margin < -tol:
        status = INFEASIBLE
    else:
        status = FEASIBLE
    feasible = status != INFEASIBLE
    if feasible:
        violations = []
    return FeasibilityVerdict(feasible, status, T, table, violations, witness, margin, reduced)


def check(spec: SystemSpec, **kwargs) -> FeasibilityVerdict:
    """Dispatch on topology: single resource, or the two-resource layout."""
    if len(spec.resources) == 1:
        return check_single_resource(spec, **kwargs)
    return check_two_resource(spec, **kwargs)


def lifted_requirements(verdict: FeasibilityVerdict) -> dict[int, float] | None:
    from .reduction import lift_throughputs

    if verdict.witness is None or verdict.reduced is None:
        return None
    return lift_throughputs(verdict.witness, verdict.reduced)


def slack_rows(verdict: FeasibilityVerdict) -> Sequence[tuple]:
    return [
        (" ".join(map(str, r.subset)), r.workload, r.idle, r.idle_stderr, r.load, r.slack, int(r.uncertain))
        for r in verdict.slack_table
    ]
