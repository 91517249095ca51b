"""Dense two-phase primal simplex with Bland's rule.

Solves   maximize c.x   subject to  A x <= b,  x >= 0.

Sized for feasibility programs with a few thousand rows and columns at
most.  Bland's pivoting rule (lowest eligible index enters, lowest
index leaves among minimum-ratio ties) guarantees termination at the
cost of speed; the problems this package generates are small enough
that this does not matter.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

Array = np.ndarray


class LPStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class LPResult:
    status: LPStatus
    x: Array | None
    objective: float


_PIVOT_TOL = 1e-9


def _pivot(tab: Array, basis: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    piv_row = tab[row]
    col_vals = tab[:, col].copy()
    col_vals[row] = 0.0
    tab -= np.outer(col_vals, piv_row)
    tab[row] = piv_row
    basis[row] = col


def _run_simplex(tab: Array, basis: np.ndarray, n_cols: int, max_iter: int) -> LPStatus:
    """Iterate on a tableau whose last row is the (maximization) objective."""
    m = tab.shape[0] - 1
    for _ in range(max_iter):
        red = tab[-1, :n_cols]
        entering = -1
        for j in range(n_cols):  # Bland: lowest improving index
            if red[j] > _PIVOT_TOL:
                entering = j
                break
        if entering < 0:
            return LPStatus.OPTIMAL
        col = tab[:m, entering]
        rhs = tab[:m, -1]
        best = None
        leave = -1
        for i in range(m):
            if col[i] > _PIVOT_TOL:
                ratio = rhs[i] / col[i]
                if best is None or ratio < best - 1e-12 or (
                        abs(ratio - best) <= 1e-12 and basis[leave] > basis[i]):
                    best = ratio
                    leave = i
        if leave < 0:
            return LPStatus.UNBOUNDED
        _pivot(tab, basis, leave, entering)
    return LPStatus.ITERATION_LIMIT


def simplex_solve(c: Array, A: Array, b: Array, max_iter: int | None = None) -> LPResult:
    """Maximize c.x subject to A x <= b, x >= 0 by two-phase simplex."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    if max_iter is None:
        max_iter = 50 * (m + n + 10)

    # rows with negative rhs are negated and given artificial variables
    A = A.copy()
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    n_art = int(np.count_nonzero(neg))

    # columns: [x (n) | slack (m) | artificial (n_art) | rhs]
    total = n + m + n_art
    tab = np.zeros((m + 1, total + 1))
    tab[:m, :n] = A
    slack = np.eye(m)
    slack[neg] *= -1.0
    tab[:m, n:n + m] = slack
    art_cols = []
    ai = 0
    basis = np.empty(m, dtype=int)
    for i in range(m):
        if neg[i]:
            col = n + m + ai
            tab[i, col] = 1.0
            basis[i] = col
            art_cols.append(col)
            ai += 1
        else:
            basis[i] = n + i
    tab[:m, -1] = b

    if n_art:
        # phase 1: maximize -sum(artificials)
        for col in art_cols:
            tab[-1, col] = -1.0
        for i in range(m):
            if basis[i] in art_cols:
                tab[-1] += tab[i]
        status = _run_simplex(tab, basis, total, max_iter)
        if status is not LPStatus.OPTIMAL:
            return LPResult(status, None, np.nan)
        # objective row rhs holds -(phase-1 objective) = sum of artificials
        if tab[-1, -1] > 1e-7:
            return LPResult(LPStatus.INFEASIBLE, None, np.nan)
        # drive any residual artificial out of the basis
        for i in range(m):
            if basis[i] in art_cols:
                for j in range(n + m):
                    if abs(tab[i, j]) > _PIVOT_TOL:
                        _pivot(tab, basis, i, j)
                        break
        tab[:, n + m:total] = 0.0
        tab[-1, :] = 0.0

    # phase 2 objective; artificial columns stay out (entering scan stops at n+m)
    tab[-1, :n] = c
    for i in range(m):
        if basis[i] < n:
            tab[-1] -= c[basis[i]] * tab[i]
    status = _run_simplex(tab, basis, n + m, max_iter)
    if status is not LPStatus.OPTIMAL:
        return LPResult(status, None, np.nan)
    x = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = tab[i, -1]
    return LPResult(LPStatus.OPTIMAL, x, float(c @ x))
