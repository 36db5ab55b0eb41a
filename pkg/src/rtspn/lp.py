"""Small dense linear programs.

Two-phase tableau simplex with Bland's rule, so degenerate problems (the
feasibility LPs here are highly degenerate) terminate.  Meant for tens of
variables and at most a few tens of thousands of rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

EPS_LP = 1e-9
_PIVOT_EPS = 1e-12

LE, GE, EQ = "<=", ">=", "=="


class Infeasible(Exception):
    pass


class Unbounded(Exception):
    """Objective grows without bound; for this package it means a malformed build."""


class LpNumericalFailure(RuntimeError):
    pass


@dataclass
class LinearProgram:
    """maximize ``objective @ x`` subject to ``rows``.

    Each row is ``(coefficients, relation, rhs)`` with relation one of
    ``"<="``, ``">="``, ``"=="``.  ``nonneg[j]`` False makes ``x[j]`` free.
    """

    n_vars: int
    objective: Sequence[float]
    rows: list = field(default_factory=list)
    nonneg: Sequence[bool] | None = None

    def __post_init__(self):
        if len(self.objective) != self.n_vars:
            raise ValueError("objective length does not match n_vars")
        if self.nonneg is None:
            self.nonneg = [True] * self.n_vars
        for coeffs, rel, _ in self.rows:
            self._check_row(coeffs, rel)

    def _check_row(self, coeffs, rel):
        if len(coeffs) != self.n_vars:
            raise ValueError(f"row has {len(coeffs)} coefficients, expected {self.n_vars}")
        if rel not in (LE, GE, EQ):
            raise ValueError(f"unknown relation {rel!r}")

    def add(self, coeffs, rel, rhs):
        self._check_row(coeffs, rel)
        self.rows.append((list(coeffs), rel, float(rhs)))

    def violation(self, x) -> float:
        """Largest constraint violation at ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        for coeffs, rel, rhs in self.rows:
            lhs = float(np.dot(coeffs, x))
            if rel in (LE, EQ):
                worst = max(worst, lhs - rhs)
            if rel in (GE, EQ):
                worst = max(worst, rhs - lhs)
        for j, nn in enumerate(self.nonneg):
            if nn:
                worst = max(worst, -x[j])
        return worst


@dataclass
class LpSolution:
    x: np.ndarray
    value: float


def _pivot(tab: np.ndarray, basis: list, r: int, c: int) -> None:
    tab[r] /= tab[r, c]
    col = tab[:, c].copy()
    col[r] = 0.0
    tab -= np.outer(col, tab[r])
    basis[r] = c


def _simplex(tab: np.ndarray, basis: list, allowed: int) -> None:
    """Maximise in place; the last row holds reduced costs as ``-c``.

    Only columns ``< allowed`` may enter.  Bland's rule: lowest entering
    index with negative reduced cost, ties in the ratio test to the lowest
    basic index.
    """
    m = tab.shape[0] - 1
    limit = 50 * (tab.shape[1] + m) + 1000
    for _ in range(limit):
        obj = tab[-1, :allowed]
        entering = np.flatnonzero(obj < -EPS_LP)
        if entering.size == 0:
            return
        c = int(entering[0])
        col = tab[:m, c]
        ok = col > _PIVOT_EPS
        if not ok.any():
            raise Unbounded()
        ratios = np.full(m, np.inf)
        ratios[ok] = tab[:m, -1][ok] / col[ok]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + EPS_LP * max(1.0, abs(best)))
        r = min(ties, key=lambda i: basis[i])
        _pivot(tab, basis, int(r), c)
    raise LpNumericalFailure("simplex iteration limit reached")


def lp_max(lp: LinearProgram) -> LpSolution:
    """Solve ``lp``.  Raises Infeasible or Unbounded."""
    n = lp.n_vars
    # free variables are split as x = x+ - x-
    cols = []
    for j in range(n):
        cols.append((j, 1.0))
        if not lp.nonneg[j]:
            cols.append((j, -1.0))
    nx = len(cols)

    A, b, rels = [], [], []
    for coeffs, rel, rhs in lp.rows:
        row = [coeffs[j] * s for j, s in cols]
        if rhs < 0:
            row = [-a for a in row]
            rhs = -rhs
            rel = {LE: GE, GE: LE, EQ: EQ}[rel]
        A.append(row)
        b.append(rhs)
        rels.append(rel)
    m = len(A)
    n_slack = sum(rel != EQ for rel in rels)
    n_art = sum(rel != LE for rel in rels)
    width = nx + n_slack + n_art + 1
    tab = np.zeros((m + 1, width))
    basis = [-1] * m
    s_col, a_col = nx, nx + n_slack
    art_cols = []
    for i, (row, rhs, rel) in enumerate(zip(A, b, rels)):
        tab[i, :nx] = row
        tab[i, -1] = rhs
        if rel == LE:
            tab[i, s_col] = 1.0
            basis[i] = s_col
            s_col += 1
        else:
            if rel == GE:
                tab[i, s_col] = -1.0
                s_col += 1
            tab[i, a_col] = 1.0
            basis[i] = a_col
            art_cols.append(a_col)
            a_col += 1
    first_art = nx + n_slack

    if art_cols:
        # phase 1: maximise -sum(artificials)
        tab[-1, :] = 0.0
        tab[-1, art_cols] = 1.0
        for i, bi in enumerate(basis):
            if bi >= first_art:
                tab[-1] -= tab[i]
        _simplex(tab, basis, width - 1)
        if -tab[-1, -1] > EPS_LP * max(1.0, float(np.abs(b).max(initial=0.0))):
            raise Infeasible()
        # drive remaining artificials out of the basis
        keep = []
        for i in range(m):
            if basis[i] >= first_art:
                cand = np.flatnonzero(np.abs(tab[i, :first_art]) > _PIVOT_EPS * 1e3)
                if cand.size:
                    _pivot(tab, basis, i, int(cand[0]))
                    keep.append(i)
            else:
                keep.append(i)
        if len(keep) < m:
            tab = np.vstack([tab[keep], tab[-1:]])
            basis = [basis[i] for i in keep]
            m = len(keep)
        tab = np.hstack([tab[:, :first_art], tab[:, -1:]])

    c = np.zeros(tab.shape[1])
    for k, (j, s) in enumerate(cols):
        c[k] = lp.objective[j] * s
    tab[-1, :] = -c
    tab[-1, -1] = 0.0
    for i, bi in enumerate(basis):
        if tab[-1, bi] != 0.0:
            tab[-1] -= tab[-1, bi] * tab[i]
    _simplex(tab, basis, tab.shape[1] - 1)

    z = np.zeros(tab.shape[1] - 1)
    for i, bi in enumerate(basis):
        z[bi] = tab[i, -1]
    x = np.zeros(n)
    for k, (j, s) in enumerate(cols):
        x[j] += s * z[k]
    return LpSolution(x=x, value=float(np.dot(lp.objective, x)))
