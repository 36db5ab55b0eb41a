import json

import pytest

from rtspn.model import EveryFrame, SystemSpec, TaskSpec, spec_to_dict, validate_spec

ONE = frozenset({"1"})


def single(rates, reqs=None, T=1.0, arrivals=None):
    reqs = reqs or [0.0] * len(rates)
    tasks = tuple(TaskSpec(i + 1, float(r), float(q), ONE) for i, (r, q) in enumerate(zip(rates, reqs)))
    return validate_spec(SystemSpec(tasks, ONE, T, arrivals or EveryFrame()))


def two_resource(rates, reqs=None, T=1.0):
    """Task 1 on A, task 2 on B, tasks 3.. on both."""
    reqs = reqs or [0.0] * len(rates)
    res = [frozenset("A"), frozenset("B")] + [frozenset("AB")] * (len(rates) - 2)
    tasks = tuple(TaskSpec(i + 1, float(r), float(q), s) for i, (r, q, s) in enumerate(zip(rates, reqs, res)))
    return validate_spec(SystemSpec(tasks, frozenset("AB"), T, EveryFrame()))


def write_spec(path, spec):
    path.write_text(json.dumps(spec_to_dict(spec)))
    return str(path)


@pytest.fixture
def one_task():
    return single([1.0], [0.6])


@pytest.fixture
def three_tasks():
    return single([0.7, 1.0, 1.6], [0.1, 0.2, 0.3])


@pytest.fixture
def two_res():
    return two_resource([3.0, 1.0, 1.5], [0.3, 0.3, 0.2])
