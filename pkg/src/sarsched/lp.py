"""Dense linear-program solver: two-phase primal simplex with Bland's rule.

Solves  min c.x  subject to  A_eq x = b_eq,  A_ub x <= b_ub,  x >= lb
on a dense tableau. Problem sizes in this package are small, so a dense
tableau is adequate and easy to verify. Equality rows get artificial
variables in phase one (no big-M), which avoids conditioning issues.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

PIVOT_TOL = 1e-9
FEASIBILITY_TOL = 1e-7


class DimensionMismatch(Exception):
    """Raised when constraint matrices disagree with the objective length."""


class LPStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LPStandardForm:
    """min objective.x with equality rows, upper-bound rows and lower bounds."""

    objective: np.ndarray
    eq_matrix: np.ndarray | None = None
    eq_rhs: np.ndarray | None = None
    ub_matrix: np.ndarray | None = None
    ub_rhs: np.ndarray | None = None
    lower_bounds: np.ndarray | None = None  # default 0 per variable

    def validated(self) -> tuple[np.ndarray, ...]:
        c = np.atleast_1d(np.asarray(self.objective, dtype=float))
        n = c.shape[0]
        if n == 0:
            raise DimensionMismatch("objective must have at least one variable")

        def pair(mat, rhs, label):
            if mat is None and rhs is None:
                return np.zeros((0, n)), np.zeros(0)
            if mat is None or rhs is None:
                raise DimensionMismatch(f"{label} matrix and rhs must come together")
            m = np.atleast_2d(np.asarray(mat, dtype=float))
            r = np.atleast_1d(np.asarray(rhs, dtype=float))
            if m.shape[1] != n:
                raise DimensionMismatch(f"{label} matrix has {m.shape[1]} columns, expected {n}")
            if m.shape[0] != r.shape[0]:
                raise DimensionMismatch(f"{label} rhs length {r.shape[0]} != {m.shape[0]} rows")
            return m, r

        a_eq, b_eq = pair(self.eq_matrix, self.eq_rhs, "equality")
        a_ub, b_ub = pair(self.ub_matrix, self.ub_rhs, "upper-bound")
        if self.lower_bounds is None:
            lb = np.zeros(n)
        else:
            lb = np.atleast_1d(np.asarray(self.lower_bounds, dtype=float))
            if lb.shape[0] != n:
                raise DimensionMismatch(f"lower_bounds length {lb.shape[0]} != {n}")
        return c, a_eq, b_eq, a_ub, b_ub, lb


@dataclass
class LPResult:
    status: LPStatus
    solution: np.ndarray | None
    objective_value: float | None


def _pivot(tableau: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])
    basis[row] = col


def _run_simplex(tableau: np.ndarray, basis: np.ndarray, ncols: int) -> str:
    """Iterate Bland pivots until optimal or unbounded.

    Last tableau row holds reduced costs, last column the RHS.
    """
    while True:
        reduced = tableau[-1, :ncols]
        entering = np.nonzero(reduced < -PIVOT_TOL)[0]
        if entering.size == 0:
            return "optimal"
        col = entering[0]  # Bland: lowest index
        column = tableau[:-1, col]
        positive = column > PIVOT_TOL
        if not positive.any():
            return "unbounded"
        ratios = np.full(column.shape[0], np.inf)
        ratios[positive] = tableau[:-1, -1][positive] / column[positive]
        best = ratios.min()
        ties = np.nonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))[0]
        row = ties[np.argmin(basis[ties])]  # Bland: lowest basic index leaves
        _pivot(tableau, basis, row, col)


def solve(problem: LPStandardForm, debug: bool = False) -> LPResult:
    """Solve the LP, classifying it as optimal, infeasible or unbounded."""
    c, a_eq, b_eq, a_ub, b_ub, lb = problem.validated()
    n = c.shape[0]

    # Shift x = z + lb so all variables are >= 0.
    b_ub = b_ub - a_ub @ lb
    b_eq = b_eq - a_eq @ lb

    m_ub, m_eq = a_ub.shape[0], a_eq.shape[0]
    m = m_ub + m_eq
    n_slack = m_ub

    body = np.zeros((m, n + n_slack))
    body[:m_ub, :n] = a_ub
    body[:m_ub, n : n + n_slack] = np.eye(m_ub)
    body[m_ub:, :n] = a_eq
    rhs = np.concatenate([b_ub, b_eq])

    negative = rhs < 0
    body[negative] *= -1.0
    rhs[negative] *= -1.0

    # Slack columns start the basis where they kept coefficient +1; everything
    # else (equality rows, negated inequality rows) gets an artificial.
    needs_artificial = np.ones(m, dtype=bool)
    needs_artificial[:m_ub] = negative[:m_ub]
    art_rows = np.nonzero(needs_artificial)[0]
    n_art = art_rows.shape[0]

    ncols = n + n_slack + n_art
    tableau = np.zeros((m + 1, ncols + 1))
    tableau[:m, : n + n_slack] = body
    tableau[:m, -1] = rhs
    basis = np.zeros(m, dtype=int)
    for k, i in enumerate(art_rows):
        tableau[i, n + n_slack + k] = 1.0
        basis[i] = n + n_slack + k
    slack_rows = np.nonzero(~needs_artificial)[0]
    basis[slack_rows] = n + np.asarray(slack_rows)

    # Phase one: minimize the artificial sum, priced out over the basis.
    tableau[-1, n + n_slack :-1] = 1.0
    for i in art_rows:
        tableau[-1] -= tableau[i]
    if debug:
        print("phase-1 tableau:\n", tableau)
    status = _run_simplex(tableau, basis, ncols)
    if status != "optimal" or tableau[-1, -1] < -FEASIBILITY_TOL:
        return LPResult(LPStatus.INFEASIBLE, None, None)

    # Drive remaining artificials out of the basis; a row with no real pivot
    # candidate is redundant and can be dropped.
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        if basis[i] >= n + n_slack:
            row = tableau[i, : n + n_slack]
            candidates = np.nonzero(np.abs(row) > PIVOT_TOL)[0]
            if candidates.size:
                _pivot(tableau, basis, i, candidates[0])
            else:
                keep[i] = False
    if not keep.all():
        tableau = np.vstack([tableau[:m][keep], tableau[-1:]])
        basis = basis[keep]
        m = int(keep.sum())

    # Phase two: restore the real objective and price out the basis.
    tableau = np.hstack([tableau[:, : n + n_slack], tableau[:, -1:]])
    ncols = n + n_slack
    tableau[-1, :] = 0.0
    tableau[-1, :n] = c
    for i in range(m):
        if tableau[-1, basis[i]] != 0.0:
            tableau[-1] -= tableau[-1, basis[i]] * tableau[i]
    if debug:
        print("phase-2 tableau:\n", tableau)
    status = _run_simplex(tableau, basis, ncols)
    if status == "unbounded":
        return LPResult(LPStatus.UNBOUNDED, None, None)

    z = np.zeros(ncols)
    z[basis[:m]] = tableau[:m, -1]
    x = z[:n] + lb
    return LPResult(LPStatus.OPTIMAL, x, float(c @ x))


def constraint_violation(problem: LPStandardForm, x: np.ndarray) -> float:
    """Largest violation of the problem's constraints at ``x``."""
    _, a_eq, b_eq, a_ub, b_ub, lb = problem.validated()
    worst = 0.0
    if a_ub.shape[0]:
        worst = max(worst, float(np.max(a_ub @ x - b_ub, initial=0.0)))
    if a_eq.shape[0]:
        worst = max(worst, float(np.max(np.abs(a_eq @ x - b_eq), initial=0.0)))
    worst = max(worst, float(np.max(lb - x, initial=0.0)))
    return worst
