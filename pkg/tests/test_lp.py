import itertools

import numpy as np
import pytest

from rtspn.lp import GE, LE, EQ, Infeasible, LinearProgram, Unbounded, lp_max


def vertex_enumeration(lp: LinearProgram):
    """Brute-force optimum over all basic solutions; None when infeasible.

    Assumes nonnegative variables and a bounded feasible region.
    """
    n = lp.n_vars
    rows = [(np.asarray(c, float), rel, b) for c, rel, b in lp.rows]
    rows += [(np.eye(n)[j], GE, 0.0) for j in range(n)]
    best = None
    for combo in itertools.combinations(range(len(rows)), n):
        A = np.array([rows[i][0] for i in combo])
        if abs(np.linalg.det(A)) < 1e-10:
            continue
        x = np.linalg.solve(A, np.array([rows[i][2] for i in combo]))
        if lp.violation(x) > 1e-9:
            continue
        val = float(np.dot(lp.objective, x))
        if best is None or val > best:
            best = val
    return best


def random_lp(rng, n, m):
    lp = LinearProgram(n, list(rng.normal(size=n)))
    for _ in range(m - n):
        coeffs = list(rng.normal(size=n).round(3))
        rel = rng.choice([LE, GE, EQ], p=[0.6, 0.3, 0.1])
        lp.add(coeffs, str(rel), round(float(rng.normal()), 3) + 0.5)
    for j in range(n):
        box = [0.0] * n
        box[j] = 1.0
        lp.add(box, LE, float(rng.uniform(1, 5)))
    return lp


def test_simple_max():
    lp = LinearProgram(1, [1.0], [([1.0], LE, 3.0)])
    assert lp_max(lp).x[0] == pytest.approx(3.0)


def test_simple_infeasible():
    lp = LinearProgram(1, [1.0], [([1.0], LE, -1.0)])
    with pytest.raises(Infeasible):
        lp_max(lp)


def test_unbounded():
    lp = LinearProgram(2, [1.0, 1.0], [([1.0, -1.0], LE, 1.0)])
    with pytest.raises(Unbounded):
        lp_max(lp)


def test_free_variable():
    # maximise -x with x free and x >= -2 gives x = -2
    lp = LinearProgram(1, [-1.0], [([1.0], GE, -2.0)], nonneg=[False])
    assert lp_max(lp).x[0] == pytest.approx(-2.0)


def test_row_width_checked():
    with pytest.raises(ValueError):
        LinearProgram(2, [1.0, 1.0], [([1.0], LE, 1.0)])


def test_degenerate_cycling_example():
    # Beale's example cycles under the textbook largest-coefficient rule
    lp = LinearProgram(
        4,
        [0.75, -150.0, 0.02, -6.0],
        [
            ([0.25, -60.0, -0.04, 9.0], LE, 0.0),
            ([0.5, -90.0, -0.02, 3.0], LE, 0.0),
            ([0.0, 0.0, 1.0, 0.0], LE, 1.0),
        ],
    )
    sol = lp_max(lp)
    assert sol.value == pytest.approx(0.05, abs=1e-9)


@pytest.mark.parametrize("seed", range(40))
def test_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    lp = random_lp(rng, n, int(rng.integers(n + 1, 11)))
    expected = vertex_enumeration(lp)
    if expected is None:
        with pytest.raises(Infeasible):
            lp_max(lp)
    else:
        sol = lp_max(lp)
        assert sol.value == pytest.approx(expected, abs=1e-9)
        assert lp.violation(sol.x) <= 1e-9
