"""Command line entry point: ``rtspn {check,simulate,reduce,idle,sweep}``.

Exit codes: 0 success / feasible, 2 usage or validation error, 3 infeasible,
4 boundary uncertain, 5 runtime failure.  Set ``RTSPN_LOG`` (e.g. ``DEBUG``)
for logging on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import feasibility
from .feasibility import FEASIBLE, INFEASIBLE, UNCERTAIN, check
from .idle import idle_time_expected, idle_time_monte_carlo
from .model import SystemSpec, ValidationError, load_spec, spec_to_dict, validate_spec
from .reduction import NotTwoResourceTopology, reduce
from .policy import make_policy
from .rng import split
from .simulator import config_digest, replicate, run

log = logging.getLogger("rtspn")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_UNCERTAIN, EXIT_RUNTIME = 0, 2, 3, 4, 5
_VERDICT_EXIT = {FEASIBLE: EXIT_OK, INFEASIBLE: EXIT_INFEASIBLE, UNCERTAIN: EXIT_UNCERTAIN}

SIM_COLUMNS = [
    "task_id", "arrivals", "completions", "service_time",
    "throughput", "throughput_stderr", "required_q", "met",
]
SWEEP_PARAMS = ("requirement", "rate", "frame_length")


class UsageError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    spec_path: str
    policy: str = "ldf"
    policy_args: dict = field(default_factory=dict)
    frames: int = 100_000
    seed: int = 0
    replications: int = 1
    jobs: int = 1
    param: str | None = None
    task: int | None = None
    start: float = 0.0
    stop: float = 1.0
    steps: int = 11
    simulate: bool = False
    out: str | None = None
    fmt: str = "text"

    def __post_init__(self):
        if self.command == "sweep":
            if self.param not in SWEEP_PARAMS:
                raise UsageError(f"--param must be one of {', '.join(SWEEP_PARAMS)}")
            if self.steps < 2:
                raise UsageError("--steps must be >= 2")
            if not (np.isfinite(self.start) and np.isfinite(self.stop)):
                raise UsageError("sweep range must be finite")
            if self.param != "frame_length" and self.task is None:
                raise UsageError(f"--task is required when sweeping {self.param}")

    def grid(self) -> list[float]:
        return [float(v) for v in np.linspace(self.start, self.stop, self.steps)]


def _policy_args(pairs) -> dict:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise UsageError(f"--policy-arg expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _write_csv(path, header, rows) -> None:
    fh, close = _open_out(path)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if close:
            fh.close()


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return x


# --------------------------------------------------------------------------
# subcommands


def cmd_check(args) -> int:
    spec = load_spec(args.spec)
    verdict = check(spec, idle=args.idle, samples=args.samples, seed=args.seed)
    if args.format == "csv":
        header = ["subset", "workload", "idle", "idle_stderr", "load", "slack", "uncertain"]
        _write_csv(args.out, header, [[_fmt(v) for v in r] for r in feasibility.slack_rows(verdict)])
    else:
        fh, close = _open_out(args.out)
        fh.write(verdict.summary() + "\n")
        if close:
            fh.close()
    return _VERDICT_EXIT[verdict.status]


def cmd_simulate(args) -> int:
    spec = load_spec(args.spec)
    pargs = _policy_args(args.policy_arg)
    try:
        make_policy(args.policy, spec, **pargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    started = time.perf_counter()
    rep = replicate(
        spec, args.policy, args.frames, args.seed, args.replications, policy_args=pargs, jobs=args.jobs
    )
    elapsed = time.perf_counter() - started
    rows = [[_fmt(r[c]) for c in SIM_COLUMNS] for r in rep.rows()]
    _write_csv(args.out, SIM_COLUMNS, rows)
    sidecar = args.sidecar or (args.out + ".json" if args.out not in (None, "-") else None)
    if sidecar:
        meta = {
            "seed": args.seed,
            "replication_seeds": rep.seeds,
            "config_digest": config_digest(spec, args.policy, pargs, args.frames, args.seed),
            "policy": args.policy,
            "policy_args": pargs,
            "frames": args.frames,
            "replications": args.replications,
            "idle_time": rep.idle,
            "idle_time_stderr": rep.idle_stderr,
            "wall_clock_s": elapsed,
        }
        with open(sidecar, "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
    return EXIT_OK


def cmd_reduce(args) -> int:
    spec = load_spec(args.spec)
    reduced = reduce(spec)
    doc = spec_to_dict(reduced.spec)
    roles = {reduced.first_star: "first", reduced.second_star: "second", reduced.pair_star: "pair"}
    doc["task_map"] = [
        {"reduced": k, "original": list(v), "role": roles.get(k, "same")}
        for k, v in sorted(reduced.task_map.items())
    ]
    fh, close = _open_out(args.out)
    json.dump(doc, fh, indent=2)
    fh.write("\n")
    if close:
        fh.close()
    return EXIT_OK


def cmd_idle(args) -> int:
    spec = load_spec(args.spec)
    rows = []
    for S in feasibility.subsets(spec.task_ids):
        exact = idle_time_expected(S, spec)
        mc = idle_time_monte_carlo(S, spec, args.samples, args.seed)
        rows.append([" ".join(map(str, S)), _fmt(exact.value), _fmt(mc.value), _fmt(mc.std_error), args.samples])
    _write_csv(args.out, ["subset", "analytic_value", "mc_value", "mc_stderr", "samples"], rows)
    return EXIT_OK


def _apply_param(spec: SystemSpec, cfg: ExperimentConfig, value: float) -> SystemSpec:
    if cfg.param == "frame_length":
        return validate_spec(replace(spec, frame_length=value))
    return validate_spec(spec.with_task(cfg.task, **{cfg.param: value}))


def sweep_point(spec: SystemSpec, cfg: ExperimentConfig, index: int, value: float) -> list:
    """One CSV row of a sweep; pure in its arguments."""
    point = _apply_param(spec, cfg, value)
    verdict = check(point)
    row = [_fmt(value), {FEASIBLE: 1, INFEASIBLE: 0}.get(verdict.status, "uncertain"), _fmt(verdict.min_slack)]
    if cfg.simulate:
        seed = split(cfg.seed, index)
        m = run(point, cfg.policy, cfg.frames, seed, policy_args=cfg.policy_args)
        row += [_fmt(float(v)) for v in m.throughput()]
        row.append(int(m.met().all()))
    else:
        row += [""] * len(spec.tasks) + [""]
    return row


def _sweep_job(args):
    return sweep_point(*args)


def sweep(spec: SystemSpec, cfg: ExperimentConfig) -> tuple[list[str], list[list], bool]:
    """Return (header, rows, complete).  Rows are in grid order."""
    header = ["param_value", "feasible", "min_slack"] + [f"q_hat_{n}" for n in spec.task_ids] + ["met"]
    work = [(spec, cfg, i, v) for i, v in enumerate(cfg.grid())]
    rows: list[list] = []
    try:
        if cfg.jobs > 1:
            with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
                for row in ex.map(_sweep_job, work):
                    rows.append(row)
        else:
            for w in work:
                rows.append(_sweep_job(w))
    except Exception:
        log.exception("sweep stopped after %d of %d points", len(rows), len(work))
        return header, rows, False
    return header, rows, True


def cmd_sweep(args) -> int:
    spec = load_spec(args.spec)
    cfg = ExperimentConfig(
        command="sweep",
        spec_path=args.spec,
        policy=args.policy,
        policy_args=_policy_args(args.policy_arg),
        frames=args.frames,
        seed=args.seed,
        jobs=args.jobs,
        param=args.param,
        task=args.task,
        start=args.start,
        stop=args.stop,
        steps=args.steps,
        simulate=args.simulate,
        out=args.out,
    )
    header, rows, complete = sweep(spec, cfg)
    if not complete:
        rows = rows + [["partial=true"] + [""] * (len(header) - 1)]
    _write_csv(args.out, header, rows)
    return EXIT_OK if complete else EXIT_RUNTIME


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rtspn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help="output file (default stdout)"):
        sp.add_argument("--spec", required=True, help="system spec JSON")
        sp.add_argument("--out", default=None, help=out_help)

    c = sub.add_parser("check", help="feasibility verdict")
    common(c)
    c.add_argument("--format", choices=("text", "csv"), default="text")
    c.add_argument("--idle", choices=("analytic", "analytic_mc_fallback", "monte_carlo"), default="analytic")
    c.add_argument("--samples", type=int, default=200_000)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_check)

    def sim_opts(sp):
        sp.add_argument("--policy", default="ldf", choices=("ldf", "ltdf", "static", "random", "share"))
        sp.add_argument("--policy-arg", action="append", default=[], metavar="KEY=VALUE")
        sp.add_argument("--frames", type=int, default=100_000)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--jobs", type=int, default=1)

    s = sub.add_parser("simulate", help="run a policy and report throughputs")
    common(s, "metrics CSV (default stdout)")
    sim_opts(s)
    s.add_argument("--replications", type=int, default=1)
    s.add_argument("--sidecar", default=None, help="run metadata JSON (default OUT.json)")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("reduce", help="write the equivalent single-resource spec")
    common(r)
    r.set_defaults(func=cmd_reduce)

    i = sub.add_parser("idle", help="per-subset expected idle time, exact and sampled")
    common(i)
    i.add_argument("--samples", type=int, default=1_000_000)
    i.add_argument("--seed", type=int, default=0)
    i.set_defaults(func=cmd_idle)

    w = sub.add_parser("sweep", help="feasibility (and optionally simulation) over a parameter grid")
    common(w)
    sim_opts(w)
    w.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    w.add_argument("--task", type=int, default=None)
    w.add_argument("--start", type=float, required=True)
    w.add_argument("--stop", type=float, required=True)
    w.add_argument("--steps", type=int, default=11)
    w.add_argument("--simulate", action="store_true")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    level = os.environ.get("RTSPN_LOG")
    if level:
        logging.basicConfig(level=level.upper(), stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValidationError, UsageError, NotTwoResourceTopology, feasibility.NotSingleResource,
            feasibility.TooManyTasks, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"rtspn {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"rtspn {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
