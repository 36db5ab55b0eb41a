"""Domain types for frame-based real-time processing networks.

A system is a set of tasks sharing resources.  Time is cut into frames of
length ``frame_length``; at each frame start some subset of tasks releases
one job each, and every job must finish before the frame ends or it expires.
Processing times are exponential with the task's ``rate``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "TaskSpec",
    "SystemSpec",
    "ArrivalModel",
    "EveryFrame",
    "IndependentBernoulli",
    "SubsetDistribution",
    "MarkovArrivals",
    "Job",
    "SpecIssue",
    "NonPositiveRate",
    "NonPositiveFrameLength",
    "NegativeRequirement",
    "RequirementExceedsArrivalRate",
    "UnknownResource",
    "EmptyResourceSet",
    "EmptyTaskList",
    "DuplicateTask",
    "BadDistribution",
    "UnknownKey",
    "UnknownTask",
    "ValidationError",
    "validate_spec",
    "arrival_subset_distribution",
    "mean_arrival_rate",
    "spec_from_dict",
    "spec_to_dict",
    "load_spec",
]

PROB_TOL = 1e-12


# --------------------------------------------------------------------------
# errors


class SpecIssue(ValueError):
    """One violated invariant.  ``where`` names the task or subset at fault."""

    def __init__(self, where, message: str):
        self.where = where
        super().__init__(f"{type(self).__name__}({where}): {message}")


class NonPositiveRate(SpecIssue):
    pass


class NonPositiveFrameLength(SpecIssue):
    pass


class NegativeRequirement(SpecIssue):
    pass


class RequirementExceedsArrivalRate(SpecIssue):
    pass


class UnknownResource(SpecIssue):
    pass


class EmptyResourceSet(SpecIssue):
    pass


class EmptyTaskList(SpecIssue):
    pass


class DuplicateTask(SpecIssue):
    pass


class BadDistribution(SpecIssue):
    pass


class UnknownKey(SpecIssue):
    pass


class UnknownTask(KeyError):
    pass


class ValidationError(ValueError):
    """Raised with the full list of issues found in a spec."""

    def __init__(self, issues: Sequence[SpecIssue]):
        self.issues = list(issues)
        lines = "; ".join(str(i) for i in self.issues)
        super().__init__(f"{len(self.issues)} invalid field(s): {lines}")


# --------------------------------------------------------------------------
# arrival models


class ArrivalModel:
    """Per-frame law of which tasks release a job."""

    kind = "abstract"

    def subset_distribution(self, tasks: Sequence[int]) -> dict[frozenset, float]:
        raise NotImplementedError

    def mean_rate(self, n: int) -> float:
        raise NotImplementedError

    def issues(self, task_ids: Sequence[int]) -> list[SpecIssue]:
        return []

    def sampler(self, task_ids: Sequence[int], rng: np.random.Generator):
        """Return ``draw(m) -> bool array (m, len(task_ids))`` of arrivals."""
        dist = self.subset_distribution(task_ids)
        subsets = list(dist)
        probs = np.array([dist[s] for s in subsets])
        probs = probs / probs.sum()
        table = np.array(
            [[n in s for n in task_ids] for s in subsets], dtype=bool
        ).reshape(len(subsets), len(task_ids))
        cum = np.cumsum(probs)
        cum[-1] = 1.0

        def draw(m: int) -> np.ndarray:
            idx = np.searchsorted(cum, rng.random(m), side="right")
            return table[np.minimum(idx, len(subsets) - 1)]

        return draw


@dataclass(frozen=True)
class EveryFrame(ArrivalModel):
    kind = "every_frame"

    def subset_distribution(self, tasks):
        return {frozenset(tasks): 1.0}

    def mean_rate(self, n):
        return 1.0

    def sampler(self, task_ids, rng):
        k = len(task_ids)
        return lambda m: np.ones((m, k), dtype=bool)


@dataclass(frozen=True)
class IndependentBernoulli(ArrivalModel):
    p: Mapping[int, float]
    kind = "bernoulli"

    def subset_distribution(self, tasks):
        tasks = sorted(tasks)
        for n in tasks:
            if n not in self.p:
                raise UnknownTask(n)
        out = {}
        for bits in itertools.product((False, True), repeat=len(tasks)):
            prob = 1.0
            for n, on in zip(tasks, bits):
                prob *= self.p[n] if on else 1.0 - self.p[n]
            out[frozenset(n for n, on in zip(tasks, bits) if on)] = prob
        return out

    def mean_rate(self, n):
        if n not in self.p:
            raise UnknownTask(n)
        return float(self.p[n])

    def issues(self, task_ids):
        found = []
        for n in task_ids:
            if n not in self.p:
                found.append(BadDistribution(n, "missing arrival probability"))
        for n, pn in self.p.items():
            if n not in task_ids:
                found.append(BadDistribution(n, "probability for unknown task"))
            elif not 0.0 <= pn <= 1.0:
                found.append(BadDistribution(n, f"probability {pn} outside [0, 1]"))
        return found

    def sampler(self, task_ids, rng):
        p = np.array([self.p[n] for n in task_ids], dtype=float)
        return lambda m: rng.random((m, len(task_ids))) < p


@dataclass(frozen=True)
class SubsetDistribution(ArrivalModel):
    """Explicit joint law; ``dist`` pairs sorted id tuples with probabilities."""

    dist: tuple[tuple[tuple[int, ...], float], ...]
    kind = "subset"

    @classmethod
    def from_mapping(cls, mapping: Mapping[Iterable[int], float]) -> "SubsetDistribution":
        return cls(tuple((tuple(sorted(s)), float(p)) for s, p in mapping.items()))

    def subset_distribution(self, tasks):
        keep = frozenset(tasks)
        out: dict[frozenset, float] = {}
        for subset, prob in self.dist:
            key = frozenset(subset) & keep
            out[key] = out.get(key, 0.0) + prob
        return out

    def mean_rate(self, n):
        return math.fsum(p for s, p in self.dist if n in s)

    def issues(self, task_ids):
        found = []
        seen = set()
        for subset, prob in self.dist:
            if subset in seen:
                found.append(BadDistribution(list(subset), "duplicate subset"))
            seen.add(subset)
            if prob < 0:
                found.append(BadDistribution(list(subset), f"negative probability {prob}"))
            unknown = [n for n in subset if n not in task_ids]
            if unknown:
                found.append(BadDistribution(list(subset), f"unknown task(s) {unknown}"))
        total = math.fsum(p for _, p in self.dist)
        if abs(total - 1.0) > PROB_TOL:
            found.append(BadDistribution("dist", f"probabilities sum to {total!r}"))
        return found


@dataclass(frozen=True)
class MarkovArrivals(ArrivalModel):
    """Frame-to-frame Markov modulated arrivals.

    State ``i`` releases exactly the tasks in ``states[i]``.  Stationary
    quantities are exposed for analysis; only the simulator uses the
    correlation across frames.
    """

    states: tuple[tuple[int, ...], ...]
    transition: tuple[tuple[float, ...], ...]
    initial: int = 0
    kind = "markov"

    def stationary(self) -> np.ndarray:
        P = np.asarray(self.transition, dtype=float)
        k = len(P)
        A = np.vstack([P.T - np.eye(k), np.ones(k)])
        b = np.zeros(k + 1)
        b[-1] = 1.0
        pi, *_ = np.linalg.lstsq(A, b, rcond=None)
        pi = np.clip(pi, 0.0, None)
        return pi / pi.sum()

    def subset_distribution(self, tasks):
        keep = frozenset(tasks)
        out: dict[frozenset, float] = {}
        for state, prob in zip(self.states, self.stationary()):
            key = frozenset(state) & keep
            out[key] = out.get(key, 0.0) + float(prob)
        return out

    def mean_rate(self, n):
        return float(sum(p for s, p in zip(self.states, self.stationary()) if n in s))

    def issues(self, task_ids):
        found = []
        P = np.asarray(self.transition, dtype=float)
        k = len(self.states)
        if P.shape != (k, k):
            return [BadDistribution("transition", f"shape {P.shape}, expected {(k, k)}")]
        if (P < 0).any() or not np.allclose(P.sum(axis=1), 1.0, atol=PROB_TOL, rtol=0):
            found.append(BadDistribution("transition", "rows must be probability vectors"))
        if not 0 <= self.initial < k:
            found.append(BadDistribution("initial", f"state {self.initial} out of range"))
        for state in self.states:
            unknown = [n for n in state if n not in task_ids]
            if unknown:
                found.append(BadDistribution(list(state), f"unknown task(s) {unknown}"))
        return found

    def sampler(self, task_ids, rng):
        table = np.array([[n in s for n in task_ids] for s in self.states], dtype=bool)
        cum = np.cumsum(np.asarray(self.transition, dtype=float), axis=1)
        cum[:, -1] = 1.0
        state = self.initial

        def draw(m):
            nonlocal state
            u = rng.random(m)
            out = np.empty(m, dtype=np.intp)
            for i in range(m):
                out[i] = state
                state = int(np.searchsorted(cum[state], u[i], side="right"))
            return table[out]

        return draw


def arrival_subset_distribution(model: ArrivalModel, tasks: Sequence[int]) -> dict[frozenset, float]:
    """Joint per-frame law r(.) of the arriving subset, restricted to ``tasks``."""
    return model.subset_distribution(list(tasks))


def mean_arrival_rate(model: ArrivalModel, n: int, tasks: Sequence[int] | None = None) -> float:
    """Average number of jobs task ``n`` releases per frame."""
    if tasks is not None and n not in tasks:
        raise UnknownTask(n)
    return model.mean_rate(n)


# --------------------------------------------------------------------------
# specs


@dataclass(frozen=True)
class TaskSpec:
    id: int
    rate: float
    requirement: float
    resources: frozenset = frozenset({"1"})


@dataclass(frozen=True)
class SystemSpec:
    tasks: tuple[TaskSpec, ...]
    resources: frozenset
    frame_length: float
    arrivals: ArrivalModel = field(default_factory=EveryFrame)

    @property
    def task_ids(self) -> tuple[int, ...]:
        return tuple(t.id for t in self.tasks)

    def task(self, n: int) -> TaskSpec:
        for t in self.tasks:
            if t.id == n:
                return t
        raise UnknownTask(n)

    def arrival_rate(self, n: int) -> float:
        return mean_arrival_rate(self.arrivals, n, self.task_ids)

    def with_task(self, n: int, **changes) -> "SystemSpec":
        from dataclasses import replace

        tasks = tuple(replace(t, **changes) if t.id == n else t for t in self.tasks)
        return replace(self, tasks=tasks)


@dataclass
class Job:
    """A released job.  ``required_time`` is hidden from policies."""

    task: int
    frame: int
    required_time: float
    received_time: float = 0.0

    @property
    def remaining(self) -> float:
        return self.required_time - self.received_time

    @property
    def done(self) -> bool:
        return self.received_time >= self.required_time


def validate_spec(raw: SystemSpec) -> SystemSpec:
    """Return ``raw`` unchanged if every invariant holds, else raise ValidationError."""
    issues: list[SpecIssue] = []
    if not raw.tasks:
        issues.append(EmptyTaskList("tasks", "at least one task is required"))
    if not raw.frame_length > 0 or not math.isfinite(raw.frame_length):
        issues.append(NonPositiveFrameLength("frame_length", f"frame length {raw.frame_length} must be positive"))
    ids = [t.id for t in raw.tasks]
    for n in sorted({n for n in ids if ids.count(n) > 1}):
        issues.append(DuplicateTask(n, "task id used more than once"))
    for t in raw.tasks:
        if not t.rate > 0 or not math.isfinite(t.rate):
            issues.append(NonPositiveRate(t.id, f"rate {t.rate} must be positive"))
        if not t.requirement >= 0:
            issues.append(NegativeRequirement(t.id, f"requirement {t.requirement} is negative"))
        if not t.resources:
            issues.append(EmptyResourceSet(t.id, "task uses no resource"))
        for r in sorted(set(t.resources) - set(raw.resources)):
            issues.append(UnknownResource(t.id, f"resource {r!r} not declared"))
    model_issues = raw.arrivals.issues(ids)
    issues.extend(model_issues)
    if not model_issues:
        for t in raw.tasks:
            r = raw.arrivals.mean_rate(t.id)
            if t.requirement > r + PROB_TOL:
                issues.append(
                    RequirementExceedsArrivalRate(
                        t.id, f"requirement {t.requirement} > arrival rate {r}"
                    )
                )
    if issues:
        raise ValidationError(issues)
    return raw


# --------------------------------------------------------------------------
# JSON


_TOP_KEYS = {"frame_length", "resources", "tasks", "arrivals"}
_TASK_KEYS = {"id", "rate", "requirement", "resources"}
_ARRIVAL_KEYS = {
    "every_frame": {"kind"},
    "bernoulli": {"kind", "p"},
    "subset": {"kind", "dist"},
    "markov": {"kind", "states", "transition", "initial"},
}


def _strict(obj: Mapping, allowed: set, where: str, issues: list) -> None:
    if not isinstance(obj, Mapping):
        raise ValidationError([BadDistribution(where, f"expected an object, got {type(obj).__name__}")])
    for key in sorted(set(obj) - allowed):
        issues.append(UnknownKey(where, f"unexpected key {key!r}"))


def spec_from_dict(doc: Mapping, *, validate: bool = True) -> SystemSpec:
    issues: list[SpecIssue] = []
    _strict(doc, _TOP_KEYS | {"task_map"}, "spec", issues)
    tasks = []
    for i, raw in enumerate(doc.get("tasks", [])):
        _strict(raw, _TASK_KEYS, f"tasks[{i}]", issues)
        tasks.append(
            TaskSpec(
                id=int(raw["id"]),
                rate=float(raw["rate"]),
                requirement=float(raw.get("requirement", 0.0)),
                resources=frozenset(str(r) for r in raw["resources"]),
            )
        )
    arrivals_doc = doc.get("arrivals", {"kind": "every_frame"})
    kind = arrivals_doc.get("kind")
    if kind not in _ARRIVAL_KEYS:
        issues.append(BadDistribution("arrivals", f"unknown kind {kind!r}"))
        arrivals: ArrivalModel = EveryFrame()
    else:
        _strict(arrivals_doc, _ARRIVAL_KEYS[kind], "arrivals", issues)
        if kind == "every_frame":
            arrivals = EveryFrame()
        elif kind == "bernoulli":
            arrivals = IndependentBernoulli({int(k): float(v) for k, v in arrivals_doc["p"].items()})
        elif kind == "subset":
            entries = []
            for j, e in enumerate(arrivals_doc["dist"]):
                _strict(e, {"subset", "prob"}, f"arrivals.dist[{j}]", issues)
                entries.append((tuple(sorted(int(n) for n in e["subset"])), float(e["prob"])))
            arrivals = SubsetDistribution(tuple(entries))
        else:
            arrivals = MarkovArrivals(
                states=tuple(tuple(sorted(int(n) for n in s)) for s in arrivals_doc["states"]),
                transition=tuple(tuple(float(x) for x in row) for row in arrivals_doc["transition"]),
                initial=int(arrivals_doc.get("initial", 0)),
            )
    spec = SystemSpec(
        tasks=tuple(tasks),
        resources=frozenset(str(r) for r in doc.get("resources", [])),
        frame_length=float(doc.get("frame_length", float("nan"))),
        arrivals=arrivals,
    )
    if issues:
        raise ValidationError(issues)
    return validate_spec(spec) if validate else spec


def spec_to_dict(spec: SystemSpec) -> dict:
    arr = spec.arrivals
    if isinstance(arr, EveryFrame):
        arrivals = {"kind": "every_frame"}
    elif isinstance(arr, IndependentBernoulli):
        arrivals = {"kind": "bernoulli", "p": {str(k): v for k, v in sorted(arr.p.items())}}
    elif isinstance(arr, SubsetDistribution):
        arrivals = {"kind": "subset", "dist": [{"subset": list(s), "prob": p} for s, p in arr.dist]}
    elif isinstance(arr, MarkovArrivals):
        arrivals = {
            "kind": "markov",
            "states": [list(s) for s in arr.states],
            "transition": [list(r) for r in arr.transition],
            "initial": arr.initial,
        }
    else:
        raise TypeError(f"cannot serialise {type(arr).__name__}")
    return {
        "frame_length": spec.frame_length,
        "resources": sorted(spec.resources),
        "tasks": [
            {"id": t.id, "rate": t.rate, "requirement": t.requirement, "resources": sorted(t.resources)}
            for t in spec.tasks
        ],
        "arrivals": arrivals,
    }


def load_spec(path: str | Path) -> SystemSpec:
    with open(path) as fh:
        return spec_from_dict(json.load(fh))
