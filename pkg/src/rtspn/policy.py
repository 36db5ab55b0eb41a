"""Debt bookkeeping and scheduling policies.

A task's time-based debt at frame ``k`` is ``(k - 1) * w - service``:
how far its delivered processing time lags ``k - 1`` frames of implied
workload.  Debts change only at frame boundaries.

Policies are non-clairvoyant.  The simulator tells them which jobs arrived,
which are still pending and how much of the frame has elapsed, never how
long a job will take.
"""

from __future__ import annotations

import copy
from typing import Mapping, Sequence

import numpy as np

from .feasibility import implied_workload
from .model import SystemSpec
from .rng import POLICY_STREAM, make_rng
from .reduction import NotTwoResourceTopology, TwoResourceTopology, two_resource_topology


class ServiceExceedsFrame(ValueError):
    pass


class UnsupportedTopology(ValueError):
    pass


class DebtLedger:
    def __init__(self, workloads: Mapping[int, float], frame_length: float):
        self.task_ids = tuple(sorted(workloads))
        self.workload = {n: float(workloads[n]) for n in self.task_ids}
        self.frame_length = float(frame_length)
        self.service = {n: 0.0 for n in self.task_ids}
        self.frame_index = 1

    @classmethod
    def for_spec(cls, spec: SystemSpec) -> "DebtLedger":
        return cls({t.id: implied_workload(t.requirement, t.rate) for t in spec.tasks}, spec.frame_length)

    def debt(self, n: int) -> float:
        return (self.frame_index - 1) * self.workload[n] - self.service[n]

    def debts(self) -> dict[int, float]:
        return {n: self.debt(n) for n in self.task_ids}

    def record(self, frame_service: Mapping[int, float]) -> "DebtLedger":
        """Close the current frame in place."""
        for n, g in frame_service.items():
            if g > self.frame_length * (1 + 1e-12) or g < 0:
                raise ServiceExceedsFrame(f"task {n}: service {g} outside [0, {self.frame_length}]")
        for n, g in frame_service.items():
            self.service[n] += g
        self.frame_index += 1
        return self

    def copy(self) -> "DebtLedger":
        return copy.deepcopy(self)


def update_ledger(ledger: DebtLedger, frame_service: Mapping[int, float]) -> DebtLedger:
    """Return a new ledger one frame later; ``ledger`` is left untouched."""
    return ledger.copy().record(frame_service)


def ldf_order(ledger: DebtLedger) -> list[int]:
    """Largest debt first; equal debts by ascending task id."""
    debts = ledger.debts()
    return sorted(ledger.task_ids, key=lambda n: (-debts[n], n))


def ltdf_select(ledger: DebtLedger, pending: frozenset, topology: TwoResourceTopology) -> frozenset:
    """Conflict-free set of pending jobs with the largest total positive debt.

    Candidates are the two single-resource jobs together, either alone, or
    one pair-type job.  Ties go to the larger set, then to the
    lexicographically smallest one.
    """
    a, b = topology.first, topology.second
    candidates = []
    if a in pending and b in pending:
        candidates.append((a, b))
    for n in (a, b, *topology.pair_tasks):
        if n in pending:
            candidates.append((n,))
    if not candidates:
        return frozenset()
    debts = ledger.debts()

    def key(c):
        return (-sum(max(debts[n], 0.0) for n in c), -len(c), tuple(sorted(c)))

    return frozenset(min(candidates, key=key))


class Policy:
    """Decision interface used by the simulator.

    ``select`` is called at frame start and after every completion and must
    return a conflict-free subset of ``pending``.
    """

    name = "policy"

    def __init__(self, spec: SystemSpec):
        self.spec = spec
        self.ledger = DebtLedger.for_spec(spec)
        self._resources = {t.id: t.resources for t in spec.tasks}

    def begin_frame(self, arrived: frozenset) -> None:
        pass

    def select(self, pending: frozenset, elapsed: float) -> frozenset:
        raise NotImplementedError

    def end_frame(self, service: Mapping[int, float]) -> None:
        self.ledger.record(service)

    def order(self) -> list[int] | None:
        """Fixed within-frame priority order, if the policy has one."""
        return None


class PriorityPolicy(Policy):
    """Serve pending jobs greedily in a per-frame priority order."""

    def __init__(self, spec):
        super().__init__(spec)
        self._order = list(spec.task_ids)

    def frame_order(self) -> list[int]:
        raise NotImplementedError

    def begin_frame(self, arrived):
        self._order = self.frame_order()

    def order(self):
        return self._order

    def select(self, pending, elapsed):
        chosen, used = [], set()
        for n in self._order:
            if n in pending and not (self._resources[n] & used):
                chosen.append(n)
                used |= self._resources[n]
        return frozenset(chosen)


class LargestDebtFirst(PriorityPolicy):
    name = "ldf"

    def frame_order(self):
        return ldf_order(self.ledger)


class StaticPriority(PriorityPolicy):
    name = "static"

    def __init__(self, spec, order: Sequence[int] | None = None):
        super().__init__(spec)
        if order is None:
            try:
                topo = two_resource_topology(spec)
                order = [topo.first, topo.second, *topo.pair_tasks]
            except NotTwoResourceTopology:
                order = sorted(spec.task_ids)
        order = [int(n) for n in order]
        if sorted(order) != sorted(spec.task_ids):
            raise ValueError(f"static order {order} is not a permutation of the task ids")
        self._static = order

    def frame_order(self):
        return list(self._static)


class RandomOrder(PriorityPolicy):
    name = "random"

    def __init__(self, spec, rng: np.random.Generator):
        super().__init__(spec)
        self.rng = rng

    def frame_order(self):
        ids = list(self.spec.task_ids)
        return [ids[i] for i in self.rng.permutation(len(ids))]


class ProportionalShare(PriorityPolicy):
    """Lottery order: each position is drawn with odds proportional to implied workload."""

    name = "share"

    def __init__(self, spec, rng: np.random.Generator):
        super().__init__(spec)
        self.rng = rng
        w = np.array([self.ledger.workload[n] for n in spec.task_ids], dtype=float)
        self._weights = w if w.sum() > 0 else np.ones_like(w)

    def frame_order(self):
        ids = list(self.spec.task_ids)
        # Efraimidis-Spirakis keys give a weighted permutation without replacement
        u = self.rng.random(len(ids))
        with np.errstate(divide="ignore"):
            keys = np.where(self._weights > 0, np.log(u) / self._weights, -np.inf)
        return [ids[i] for i in np.argsort(-keys, kind="stable")]


class LargestTotalDebtFirst(Policy):
    name = "ltdf"

    def __init__(self, spec):
        super().__init__(spec)
        try:
            self.topology = two_resource_topology(spec)
        except NotTwoResourceTopology as exc:
            raise UnsupportedTopology(str(exc)) from exc

    def select(self, pending, elapsed):
        return ltdf_select(self.ledger, pending, self.topology)


POLICIES = ("ldf", "ltdf", "static", "random", "share")


def baseline_policy(kind: str, spec: SystemSpec, rng: np.random.Generator | None = None, **args) -> Policy:
    if rng is None:
        rng = make_rng(0, POLICY_STREAM)
    if kind == "static":
        order = args.pop("order", None)
        if isinstance(order, str):
            order = [int(x) for x in order.split(",")]
        policy = StaticPriority(spec, order)
    elif kind == "random":
        policy = RandomOrder(spec, rng)
    elif kind == "share":
        policy = ProportionalShare(spec, rng)
    else:
        raise ValueError(f"unknown baseline {kind!r}")
    if args:
        raise ValueError(f"unexpected arguments for {kind}: {sorted(args)}")
    return policy


def make_policy(name: str, spec: SystemSpec, rng: np.random.Generator | None = None, **args) -> Policy:
    if name == "ldf":
        if args:
            raise ValueError(f"unexpected arguments for ldf: {sorted(args)}")
        return LargestDebtFirst(spec)
    if name == "ltdf":
        if args:
            raise ValueError(f"unexpected arguments for ltdf: {sorted(args)}")
        return LargestTotalDebtFirst(spec)
    if name in ("static", "random", "share"):
        return baseline_policy(name, spec, rng, **args)
    raise ValueError(f"unknown policy {name!r}; choose from {', '.join(POLICIES)}")
