"""Two-resource systems and their single-resource equivalent.

Topology: task ``a`` uses only resource A, task ``b`` only resource B, and
every other ("pair-type") task needs both.  The two single-resource jobs
can run side by side, so within a frame a work-conserving schedule runs
them together until the first one finishes and then runs the survivor
alone.

The reduced system has one resource and tasks

* ``c*`` - the joint phase of ``a`` and ``b``.  It lasts min(t_a, t_b),
  which is exponential with rate ``rate_a + rate_b``.
* ``a*`` - the survivor phase when job ``a`` outlasts job ``b``.  That
  happens with probability ``rate_b / (rate_a + rate_b)``, and the leftover
  is exponential with rate ``rate_a`` by memorylessness.
* ``b*`` - symmetric, probability ``rate_a / (rate_a + rate_b)``.
* ``n*`` for every pair-type task, unchanged.

Exactly one of ``a*``, ``b*`` arrives per frame; everything else arrives
every frame.  A completion of ``c*`` is a completion of ``a`` with
probability ``rate_a / (rate_a + rate_b)`` (the race is won by the faster
job), else of ``b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .model import EveryFrame, SubsetDistribution, SystemSpec, TaskSpec, validate_spec


class NotTwoResourceTopology(ValueError):
    pass


class InvalidCorrespondence(ValueError):
    pass


@dataclass(frozen=True)
class TwoResourceTopology:
    first: int  # task using only the first resource
    second: int  # task using only the second resource
    pair_tasks: tuple[int, ...]  # tasks needing both resources
    resources: tuple[str, str]


def two_resource_topology(spec: SystemSpec) -> TwoResourceTopology:
    if len(spec.resources) != 2:
        raise NotTwoResourceTopology(f"expected 2 resources, got {len(spec.resources)}")
    ra, rb = sorted(spec.resources)
    only_a = [t.id for t in spec.tasks if t.resources == frozenset({ra})]
    only_b = [t.id for t in spec.tasks if t.resources == frozenset({rb})]
    both = sorted(t.id for t in spec.tasks if t.resources == frozenset({ra, rb}))
    if len(only_a) != 1 or len(only_b) != 1:
        raise NotTwoResourceTopology(
            f"need exactly one task per single resource, got {len(only_a)} on {ra!r} and {len(only_b)} on {rb!r}"
        )
    if len(only_a) + len(only_b) + len(both) != len(spec.tasks):
        raise NotTwoResourceTopology("every other task must use both resources")
    return TwoResourceTopology(only_a[0], only_b[0], tuple(both), (ra, rb))


@dataclass(frozen=True)
class ReducedSystem:
    spec: SystemSpec
    topology: TwoResourceTopology
    first_star: int
    second_star: int
    pair_star: int
    task_map: Mapping[int, tuple[int, ...]]  # reduced id -> original ids

    @property
    def rate_first(self) -> float:
        return self.spec.task(self.first_star).rate

    @property
    def rate_second(self) -> float:
        return self.spec.task(self.second_star).rate

    def first_wins(self) -> float:
        """Probability the first-resource job finishes before the other one."""
        la, lb = self.rate_first, self.rate_second
        return la / (la + lb)

    def first_outlasts(self) -> float:
        """Probability the reduced task ``a*`` arrives in a frame."""
        return 1.0 - self.first_wins()


def reduce(spec: SystemSpec) -> ReducedSystem:
    topo = two_resource_topology(spec)
    if not isinstance(spec.arrivals, EveryFrame):
        raise NotTwoResourceTopology("the reduction needs every task to release a job every frame")
    ta, tb = spec.task(topo.first), spec.task(topo.second)
    la, lb = ta.rate, tb.rate
    pair_star = max(spec.task_ids) + 1
    resource = "+".join(topo.resources)
    res = frozenset({resource})

    tasks = [
        TaskSpec(ta.id, la, 0.0, res),
        TaskSpec(tb.id, lb, 0.0, res),
        TaskSpec(pair_star, la + lb, 0.0, res),
    ]
    tasks += [TaskSpec(n, spec.task(n).rate, 0.0, res) for n in topo.pair_tasks]
    tasks.sort(key=lambda t: t.id)

    always = tuple(sorted([pair_star, *topo.pair_tasks]))
    arrivals = SubsetDistribution.from_mapping(
        {
            (ta.id, *always): lb / (la + lb),
            (tb.id, *always): la / (la + lb),
        }
    )
    reduced_spec = validate_spec(
        SystemSpec(tuple(tasks), res, spec.frame_length, arrivals)
    )
    task_map = {ta.id: (ta.id,), tb.id: (tb.id,), pair_star: (ta.id, tb.id)}
    task_map.update({n: (n,) for n in topo.pair_tasks})
    return ReducedSystem(reduced_spec, topo, ta.id, tb.id, pair_star, task_map)


def lift_throughputs(reduced_q: Mapping[int, float], reduced: ReducedSystem) -> dict[int, float]:
    """Map reduced-system throughputs back to the original tasks."""
    win = reduced.first_wins()
    qc = reduced_q.get(reduced.pair_star, 0.0)
    out = {
        reduced.first_star: win * qc + reduced_q.get(reduced.first_star, 0.0),
        reduced.second_star: (1.0 - win) * qc + reduced_q.get(reduced.second_star, 0.0),
    }
    for n in reduced.topology.pair_tasks:
        out[n] = reduced_q.get(n, 0.0)
    return out


def decision_correspondence(reduced_choice: int, completed: frozenset, reduced: ReducedSystem) -> frozenset:
    """Original tasks to run when the reduced schedule picks ``reduced_choice``.

    ``completed`` holds the original tasks already finished this frame.
    """
    a, b = reduced.first_star, reduced.second_star
    if reduced_choice == reduced.pair_star:
        if a in completed or b in completed:
            raise InvalidCorrespondence("pair phase chosen after one of its jobs completed")
        return frozenset({a, b})
    if reduced_choice == a:
        if b not in completed or a in completed:
            raise InvalidCorrespondence(f"task {a} alone is only valid once {b} completed")
        return frozenset({a})
    if reduced_choice == b:
        if a not in completed or b in completed:
            raise InvalidCorrespondence(f"task {b} alone is only valid once {a} completed")
        return frozenset({b})
    if reduced_choice in reduced.topology.pair_tasks:
        return frozenset({reduced_choice})
    raise InvalidCorrespondence(f"unknown reduced task {reduced_choice}")


def reduced_choice_for(active: frozenset, completed: frozenset, reduced: ReducedSystem) -> int:
    """Inverse of :func:`decision_correspondence`; raises if ``active`` has no image."""
    a, b = reduced.first_star, reduced.second_star
    if active == frozenset({a, b}):
        choice = reduced.pair_star
    elif len(active) == 1:
        (choice,) = active
    else:
        raise InvalidCorrespondence(f"set {sorted(active)} has no reduced counterpart")
    if decision_correspondence(choice, completed, reduced) != active:
        raise InvalidCorrespondence(f"set {sorted(active)} does not round-trip")
    return choice
