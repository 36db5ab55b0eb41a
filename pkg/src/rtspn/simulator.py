"""Frame-based simulation of a scheduling policy.

Each frame: draw the arriving subset and one hidden exponential processing
time per task, then run the policy until the frame ends.  Unfinished jobs
expire at the frame boundary.  Processing times are drawn once at frame
start rather than by hazard stepping; by memorylessness the two are the
same in law, and fixed draws make coupled runs possible.

Single-resource runs with a priority policy take a fast path (serve pending
jobs in order, no preemption can happen since nothing arrives mid-frame).
Everything else goes through the event loop that calls ``select`` at frame
start and after every completion.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .model import SystemSpec, spec_to_dict
from .policy import Policy, make_policy
from .reduction import InvalidCorrespondence, ReducedSystem, reduced_choice_for
from .rng import POLICY_STREAM, SIM_STREAM, make_rng, split
from .stats import batch_means, mean_stderr

CHUNK = 1 << 14
CONSERVATION_TOL = 1e-12


class PolicyConflict(RuntimeError):
    pass


class NonWorkConserving(RuntimeError):
    pass


def config_digest(spec: SystemSpec, policy: str, policy_args: Mapping | None, frames: int, seed: int) -> str:
    doc = {
        "spec": spec_to_dict(spec),
        "policy": policy,
        "policy_args": {k: str(v) for k, v in sorted((policy_args or {}).items())},
        "frames": frames,
        "seed": seed,
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class RunMetrics:
    """Per-frame record of one run.  Rows are frames, columns follow ``task_ids``."""

    task_ids: tuple[int, ...]
    frame_length: float
    requirements: tuple[float, ...]
    arrivals: np.ndarray
    completions: np.ndarray
    service: np.ndarray
    idle: np.ndarray
    seed: int = 0
    policy: str = ""
    digest: str = ""

    @property
    def frames(self) -> int:
        return len(self.idle)

    def column(self, n: int) -> int:
        return self.task_ids.index(n)

    def throughput(self) -> np.ndarray:
        return self.completions.mean(axis=0)

    def throughput_stderr(self) -> np.ndarray:
        return np.array([batch_means(self.completions[:, i])[1] for i in range(len(self.task_ids))])

    def service_rate(self) -> np.ndarray:
        return self.service.mean(axis=0)

    def idle_mean(self) -> tuple[float, float]:
        return batch_means(self.idle)

    def met(self, sigmas: float = 3.0) -> np.ndarray:
        q = np.asarray(self.requirements)
        return self.throughput() >= q - sigmas * self.throughput_stderr()

    def rows(self, sigmas: float = 3.0) -> list[dict]:
        thr, se, met = self.throughput(), self.throughput_stderr(), self.met(sigmas)
        return [
            {
                "task_id": n,
                "arrivals": int(self.arrivals[:, i].sum()),
                "completions": int(self.completions[:, i].sum()),
                "service_time": float(self.service[:, i].sum()),
                "throughput": float(thr[i]),
                "throughput_stderr": float(se[i]),
                "required_q": float(self.requirements[i]),
                "met": int(met[i]),
            }
            for i, n in enumerate(self.task_ids)
        ]


def _resolve_policy(spec, policy, policy_args, seed) -> tuple[Policy, str]:
    if isinstance(policy, Policy):
        return policy, policy.name
    return make_policy(policy, spec, make_rng(seed, POLICY_STREAM), **dict(policy_args or {})), policy


def run(
    spec: SystemSpec,
    policy: str | Policy = "ldf",
    frames: int = 10_000,
    seed: int = 0,
    *,
    policy_args: Mapping | None = None,
    strict: bool = False,
    fast_path: bool = True,
) -> RunMetrics:
    """Simulate ``frames`` frames; deterministic in (spec, policy, frames, seed)."""
    if frames < 1:
        raise ValueError("frames must be >= 1")
    pol, name = _resolve_policy(spec, policy, policy_args, seed)
    ids = spec.task_ids
    k = len(ids)
    T = float(spec.frame_length)
    rates = np.array([t.rate for t in spec.tasks], dtype=float)
    resources = [t.resources for t in spec.tasks]
    col = {n: i for i, n in enumerate(ids)}
    single = len(spec.resources) == 1

    arrivals = np.zeros((frames, k), dtype=bool)
    completions = np.zeros((frames, k), dtype=bool)
    service = np.zeros((frames, k))
    idle = np.zeros(frames)

    rng = make_rng(seed, SIM_STREAM)
    draw = spec.arrivals.sampler(list(ids), rng)
    frame = 0
    while frame < frames:
        m = min(CHUNK, frames - frame)
        arr_block = draw(m)
        time_block = rng.standard_exponential((m, k)) / rates
        arrivals[frame : frame + m] = arr_block
        for i in range(m):
            arr = arr_block[i]
            times = time_block[i]
            arrived = frozenset(ids[j] for j in range(k) if arr[j])
            pol.begin_frame(arrived)
            srow = service[frame]
            crow = completions[frame]
            order = pol.order() if (single and fast_path) else None
            if order is not None:
                t = 0.0
                for n in order:
                    j = col[n]
                    if not arr[j]:
                        continue
                    need = times[j]
                    if t + need <= T:
                        srow[j] = need
                        crow[j] = True
                        t += need
                    else:
                        srow[j] = T - t
                        t = T
                        break
                idle[frame] = T - t
            else:
                idle[frame] = _event_loop(pol, arrived, times, col, resources, T, srow, crow, strict)
            pol.end_frame({n: float(srow[col[n]]) for n in ids})
            frame += 1

    requirements = tuple(t.requirement for t in spec.tasks)
    return RunMetrics(
        ids, T, requirements, arrivals, completions, service, idle, seed, name,
        config_digest(spec, name, policy_args, frames, seed),
    )


def _check_decision(active, pending, resources, col):
    if not active <= pending:
        raise PolicyConflict(f"selected {sorted(active - pending)} which are not pending")
    used: set = set()
    for n in active:
        r = resources[col[n]]
        if r & used:
            raise PolicyConflict(f"selected set {sorted(active)} shares resources")
        used |= r


def _event_loop(pol, arrived, times, col, resources, T, srow, crow, strict) -> float:
    remaining = {n: float(times[col[n]]) for n in arrived}
    pending = set(arrived)
    t = 0.0
    idle = 0.0
    while t < T:
        active = pol.select(frozenset(pending), t)
        _check_decision(active, pending, resources, col)
        if not active:
            if strict and pending:
                raise NonWorkConserving(f"idled at t={t} with {sorted(pending)} pending")
            idle += T - t
            break
        dt = min(remaining[n] for n in active)
        if t + dt > T:
            for n in active:
                srow[col[n]] += T - t
            break
        for n in active:
            srow[col[n]] += dt
            if remaining[n] == dt:
                remaining[n] = 0.0
                crow[col[n]] = True
                pending.discard(n)
            else:
                remaining[n] -= dt
        t += dt
    return idle


# --------------------------------------------------------------------------
# replications


@dataclass
class Replication:
    runs: list[RunMetrics]
    task_ids: tuple[int, ...]
    requirements: tuple[float, ...]
    throughput: np.ndarray
    throughput_stderr: np.ndarray
    idle: float
    idle_stderr: float
    seeds: list[int] = field(default_factory=list)

    def met(self, sigmas: float = 3.0) -> np.ndarray:
        return self.throughput >= np.asarray(self.requirements) - sigmas * self.throughput_stderr

    def rows(self, sigmas: float = 3.0) -> list[dict]:
        met = self.met(sigmas)
        return [
            {
                "task_id": n,
                "arrivals": int(sum(r.arrivals[:, i].sum() for r in self.runs)),
                "completions": int(sum(r.completions[:, i].sum() for r in self.runs)),
                "service_time": float(math.fsum(float(r.service[:, i].sum()) for r in self.runs)),
                "throughput": float(self.throughput[i]),
                "throughput_stderr": float(self.throughput_stderr[i]),
                "required_q": float(self.requirements[i]),
                "met": int(met[i]),
            }
            for i, n in enumerate(self.task_ids)
        ]


def _run_job(args):
    spec, policy, frames, seed, policy_args = args
    return run(spec, policy, frames, seed, policy_args=policy_args)


def replicate(
    spec: SystemSpec,
    policy: str,
    frames: int,
    base_seed: int,
    replications: int,
    *,
    policy_args: Mapping | None = None,
    jobs: int = 1,
) -> Replication:
    """Independent runs with seeds ``split(base_seed, i)``.

    With one replication the aggregate is that run (batch-means errors);
    otherwise errors come from the spread across replications.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    seeds = [split(base_seed, i) for i in range(replications)]
    work = [(spec, policy, frames, s, policy_args) for s in seeds]
    if jobs > 1 and replications > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            runs = list(ex.map(_run_job, work))
    else:
        runs = []
        for i, w in enumerate(work):
            try:
                runs.append(_run_job(w))
            except Exception as exc:
                raise RuntimeError(f"replication {i} failed: {exc}") from exc
    if replications == 1:
        r = runs[0]
        idle, idle_se = r.idle_mean()
        return Replication(runs, r.task_ids, r.requirements, r.throughput(), r.throughput_stderr(), idle, idle_se, seeds)
    thr = np.array([r.throughput() for r in runs])
    idles = [float(r.idle.mean()) for r in runs]
    idle, idle_se = mean_stderr(idles)
    return Replication(
        runs,
        runs[0].task_ids,
        runs[0].requirements,
        thr.mean(axis=0),
        thr.std(axis=0, ddof=1) / math.sqrt(replications),
        idle,
        idle_se,
        seeds,
    )


# --------------------------------------------------------------------------
# coupled two-resource / reduced run


@dataclass
class CoupledMetrics:
    direct: RunMetrics
    reduced: RunMetrics
    violations: int
    mismatches: int
    first_outlasts: np.ndarray  # per frame: job of the first task needed longer
    joint_time: np.ndarray  # per frame: min of the two single-resource times


def coupled_run(
    spec: SystemSpec,
    reduced: ReducedSystem,
    policy: str | Policy = "ltdf",
    frames: int = 10_000,
    seed: int = 0,
    *,
    policy_args: Mapping | None = None,
) -> CoupledMetrics:
    """Run ``policy`` on the two-resource system and track the reduced trajectory.

    Reduced jobs are built from the same draws: the pair phase needs
    min(t_a, t_b), the survivor phase the leftover |t_a - t_b|, pair-type
    tasks are unchanged.  Every decision is mapped to the reduced system;
    decisions without a counterpart are counted as violations, and a
    completion of the pair phase that does not coincide with the first
    completion among a, b is counted as a mismatch.
    """
    pol, name = _resolve_policy(spec, policy, policy_args, seed)
    ids = spec.task_ids
    k = len(ids)
    T = float(spec.frame_length)
    rates = np.array([t.rate for t in spec.tasks], dtype=float)
    resources = [t.resources for t in spec.tasks]
    col = {n: i for i, n in enumerate(ids)}
    a, b, c = reduced.first_star, reduced.second_star, reduced.pair_star
    rids = reduced.spec.task_ids
    rcol = {n: i for i, n in enumerate(rids)}
    kr = len(rids)

    arrivals = np.zeros((frames, k), dtype=bool)
    completions = np.zeros((frames, k), dtype=bool)
    service = np.zeros((frames, k))
    idle = np.zeros(frames)
    r_arr = np.zeros((frames, kr), dtype=bool)
    r_comp = np.zeros((frames, kr), dtype=bool)
    r_serv = np.zeros((frames, kr))
    outlasts = np.zeros(frames, dtype=bool)
    joint = np.zeros(frames)
    violations = mismatches = 0

    rng = make_rng(seed, SIM_STREAM)
    draw = spec.arrivals.sampler(list(ids), rng)
    frame = 0
    while frame < frames:
        m = min(CHUNK, frames - frame)
        arr_block = draw(m)
        time_block = rng.standard_exponential((m, k)) / rates
        arrivals[frame : frame + m] = arr_block
        for i in range(m):
            times = time_block[i]
            ta, tb = float(times[col[a]]), float(times[col[b]])
            outlasts[frame] = ta > tb
            joint[frame] = min(ta, tb)
            arrived = frozenset(ids)
            for n in rids:
                if n == a:
                    r_arr[frame, rcol[n]] = ta > tb
                elif n == b:
                    r_arr[frame, rcol[n]] = tb > ta
                else:
                    r_arr[frame, rcol[n]] = True
            pol.begin_frame(arrived)
            srow, crow = service[frame], completions[frame]
            rs, rc = r_serv[frame], r_comp[frame]
            remaining = {n: float(times[col[n]]) for n in ids}
            pending = set(ids)
            completed: set = set()
            t = 0.0
            while t < T:
                active = pol.select(frozenset(pending), t)
                _check_decision(active, pending, resources, col)
                if not active:
                    idle[frame] += T - t
                    break
                try:
                    choice = reduced_choice_for(active, frozenset(completed), reduced)
                except InvalidCorrespondence:
                    violations += 1
                    choice = None
                dt = min(remaining[n] for n in active)
                step = min(dt, T - t)
                if choice is not None:
                    rs[rcol[choice]] += step
                finished = []
                for n in active:
                    srow[col[n]] += step
                    if t + dt <= T and remaining[n] == dt:
                        remaining[n] = 0.0
                        crow[col[n]] = True
                        pending.discard(n)
                        finished.append(n)
                    else:
                        remaining[n] -= step
                if finished and choice is not None:
                    rc[rcol[choice]] = True
                    first_of_pair = bool({a, b} & set(finished)) and not ({a, b} & completed)
                    if (choice == c) != first_of_pair:
                        mismatches += 1
                completed.update(finished)
                if t + dt > T:
                    break
                t += dt
            pol.end_frame({n: float(srow[col[n]]) for n in ids})
            frame += 1

    direct = RunMetrics(
        ids, T, tuple(t.requirement for t in spec.tasks), arrivals, completions, service, idle, seed, name,
        config_digest(spec, name, policy_args, frames, seed),
    )
    red = RunMetrics(
        rids, T, tuple(0.0 for _ in rids), r_arr, r_comp, r_serv, idle.copy(), seed, name + "/reduced",
        config_digest(reduced.spec, name, policy_args, frames, seed),
    )
    return CoupledMetrics(direct, red, violations, mismatches, outlasts, joint)


def first_completion_frames(metrics: CoupledMetrics, reduced: ReducedSystem) -> tuple[np.ndarray, np.ndarray]:
    """Per frame: (pair phase completed in reduced run, a or b completed in direct run)."""
    pair = metrics.reduced.completions[:, metrics.reduced.column(reduced.pair_star)]
    d = metrics.direct
    either = d.completions[:, d.column(reduced.first_star)] | d.completions[:, d.column(reduced.second_star)]
    return pair, either


def paired_difference(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Mean of ``x - y`` with a batch-means standard error."""
    return batch_means(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
