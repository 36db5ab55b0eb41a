import csv
import io
import json

import pytest

from conftest import single, two_resource, write_spec
from rtspn.cli import main


def rows_of(path):
    return list(csv.reader(io.StringIO(path.read_text())))


@pytest.fixture
def specs(tmp_path):
    return {
        "ok": write_spec(tmp_path / "ok.json", single([1.0], [0.6])),
        "bad": write_spec(tmp_path / "bad.json", single([1.0], [0.64])),
        "zero": write_spec(tmp_path / "zero.json", single([1.0], [0.0])),
        "two": write_spec(tmp_path / "two.json", two_resource([3.0, 1.0, 1.5], [0.3, 0.3, 0.2])),
    }


def test_check_exit_codes(specs, capsys):
    assert main(["check", "--spec", specs["ok"]]) == 0
    assert "verdict: feasible" in capsys.readouterr().out
    assert main(["check", "--spec", specs["bad"]]) == 3
    out = capsys.readouterr().out
    assert "violated subset [1]" in out


def test_check_uncertain_exit(specs):
    path = specs["ok"]
    # a boundary requirement, sampled with few draws, cannot be decided
    doc = json.loads(open(path).read())
    doc["tasks"][0]["requirement"] = 0.632
    with open(path, "w") as fh:
        json.dump(doc, fh)
    assert main(["check", "--spec", path, "--idle", "monte_carlo", "--samples", "1000"]) == 4


def test_check_csv(specs, tmp_path):
    out = tmp_path / "slack.csv"
    assert main(["check", "--spec", specs["ok"], "--format", "csv", "--out", str(out)]) == 0
    rows = rows_of(out)
    assert rows[0] == ["subset", "workload", "idle", "idle_stderr", "load", "slack", "uncertain"]
    assert [r[0] for r in rows[1:]] == ["", "1"]


def test_usage_errors(tmp_path, specs, capsys):
    assert main(["simulate"]) == 2
    assert main(["check", "--spec", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "invalid.json"
    bad.write_text(json.dumps({"frame_length": -1, "resources": ["1"], "tasks": []}))
    assert main(["check", "--spec", str(bad)]) == 2
    assert main(["simulate", "--spec", specs["ok"], "--policy", "static", "--policy-arg", "order=7"]) == 2
    assert main(["reduce", "--spec", specs["ok"]]) == 2
    err = capsys.readouterr().err
    assert err.strip().splitlines()[-1].startswith("rtspn reduce:")


def test_simulate_outputs(specs, tmp_path):
    out = tmp_path / "m.csv"
    assert main(["simulate", "--spec", specs["two"], "--policy", "ltdf", "--frames", "2000", "--seed", "3",
                 "--out", str(out)]) == 0
    rows = rows_of(out)
    assert rows[0] == ["task_id", "arrivals", "completions", "service_time", "throughput",
                       "throughput_stderr", "required_q", "met"]
    assert [r[0] for r in rows[1:]] == ["1", "2", "3"]
    meta = json.loads((tmp_path / "m.csv.json").read_text())
    assert meta["seed"] == 3 and len(meta["config_digest"]) == 16
    assert 0.0 <= meta["idle_time"] <= 1.0


def test_simulate_byte_identical(specs, tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        p = tmp_path / name
        assert main(["simulate", "--spec", specs["ok"], "--frames", "3000", "--seed", "9",
                     "--replications", "3", "--out", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_reduce_output(specs, tmp_path):
    out = tmp_path / "r.json"
    assert main(["reduce", "--spec", specs["two"], "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    roles = {m["role"]: m for m in doc["task_map"]}
    assert roles["pair"]["original"] == [1, 2] and roles["pair"]["reduced"] == 4
    assert roles["same"]["original"] == [3]
    assert {t["id"]: t["rate"] for t in doc["tasks"]}[4] == 4.0


def test_idle_csv(specs, tmp_path):
    out = tmp_path / "idle.csv"
    assert main(["idle", "--spec", specs["ok"], "--samples", "20000", "--out", str(out)]) == 0
    rows = rows_of(out)
    assert rows[0] == ["subset", "analytic_value", "mc_value", "mc_stderr", "samples"]
    assert float(rows[1][1]) == 1.0
    assert abs(float(rows[2][1]) - 0.36787944117144233) < 1e-15


def test_sweep_flip(specs, tmp_path):
    out = tmp_path / "s.csv"
    args = ["sweep", "--spec", specs["zero"], "--param", "requirement", "--task", "1",
            "--start", "0", "--stop", "1", "--steps", "11", "--out", str(out)]
    assert main(args) == 0
    rows = rows_of(out)
    assert rows[0] == ["param_value", "feasible", "min_slack", "q_hat_1", "met"]
    flags = {round(float(r[0]), 6): r[1] for r in rows[1:]}
    assert flags[0.6] == "1" and flags[0.7] == "0"
    assert [r[1] for r in rows[1:]] == ["1"] * 7 + ["0"] * 4


def test_sweep_two_endpoints(specs, tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--spec", specs["zero"], "--param", "requirement", "--task", "1",
                 "--start", "0.1", "--stop", "0.5", "--steps", "2", "--out", str(out)]) == 0
    assert [r[1] for r in rows_of(out)[1:]] == ["1", "1"]


def test_sweep_simulate_deterministic_and_parallel(specs, tmp_path):
    base = ["sweep", "--spec", specs["zero"], "--param", "requirement", "--task", "1",
            "--start", "0.5", "--stop", "0.7", "--steps", "3", "--simulate", "--frames", "2000", "--seed", "4"]
    outs = []
    for name, jobs in (("a", "1"), ("b", "1"), ("c", "2")):
        p = tmp_path / f"{name}.csv"
        assert main(base + ["--jobs", jobs, "--out", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_sweep_validation(specs):
    assert main(["sweep", "--spec", specs["zero"], "--param", "requirement", "--start", "0", "--stop", "1"]) == 2
    assert main(["sweep", "--spec", specs["zero"], "--param", "rate", "--task", "1",
                 "--start", "0", "--stop", "1", "--steps", "1"]) == 2


def test_sweep_partial_footer(specs, tmp_path):
    out = tmp_path / "p.csv"
    code = main(["sweep", "--spec", specs["zero"], "--param", "frame_length",
                 "--start", "1", "--stop", "-1", "--steps", "3", "--out", str(out)])
    assert code == 5
    rows = rows_of(out)
    assert len(rows) == 3 and rows[-1][0] == "partial=true"
