"""Dense two-phase primal simplex with bounded variables.

Solves

    maximize    c . x
    subject to  A_ub x <= b_ub,  A_eq x = b_eq,  lb <= x <= ub

with finite ``lb`` and ``ub``.  The tableau is kept explicitly as a dense
numpy array, which is fine for the few hundred rows the MPE encoder emits
for small label sets.  Dantzig pricing is used until a run of degenerate
pivots is seen, then Bland's rule takes over to rule out cycling.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"
TIME_LIMIT = "time_limit"

_EPS_PIVOT = 1e-9
_EPS_COST = 1e-9
_EPS_FEAS = 1e-7
_DEGENERATE_RUN = 50


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None
    objective: float
    iterations: int


class _Tableau:
    def __init__(self, T, rhs, basis, upper, at_upper, allowed):
        self.T = T                # (m, ncols)  B^-1 A
        self.rhs = rhs            # (m,)        basic variable values
        self.basis = basis        # (m,)        column index basic in each row
        self.upper = upper        # (ncols,)    upper bounds, lower bounds are 0
        self.at_upper = at_upper  # (ncols,)    nonbasic status
        self.allowed = allowed    # (ncols,)    columns that may enter
        self.iterations = 0

    def values(self) -> np.ndarray:
        x = np.where(self.at_upper, self.upper, 0.0)
        x[self.basis] = self.rhs
        return x

    def run(self, cost: np.ndarray, max_iter: int, deadline: float | None = None) -> str:
        T, basis = self.T, self.basis
        m, ncols = T.shape
        d = cost - cost[basis] @ T
        is_basic = np.zeros(ncols, dtype=bool)
        is_basic[basis] = True
        degenerate = 0
        while True:
            if self.iterations >= max_iter:
                return ITERATION_LIMIT
            if deadline is not None and self.iterations % 64 == 0 and time.perf_counter() > deadline:
                return TIME_LIMIT
            gain = np.where(self.at_upper, -d, d)
            eligible = (gain > _EPS_COST) & ~is_basic & self.allowed
            if not eligible.any():
                return OPTIMAL
            if degenerate >= _DEGENERATE_RUN:
                j = int(np.flatnonzero(eligible)[0])
            else:
                j = int(np.argmax(np.where(eligible, gain, -np.inf)))
            direction = -1.0 if self.at_upper[j] else 1.0
            col = direction * T[:, j]

            # ratio test: basic values move by -t * col
            ub_basic = self.upper[basis]
            ratios = np.full(m, np.inf)
            dec = col > _EPS_PIVOT
            ratios[dec] = self.rhs[dec] / col[dec]
            inc = (col < -_EPS_PIVOT) & np.isfinite(ub_basic)
            ratios[inc] = (ub_basic[inc] - self.rhs[inc]) / (-col[inc])
            t_best = self.upper[j]
            leave = -1
            r_min = float(ratios.min(initial=np.inf))
            if r_min < t_best:
                t_best = r_min
                ties = np.flatnonzero(ratios <= r_min + 1e-12)
                if degenerate >= _DEGENERATE_RUN:
                    leave = int(ties[np.argmin(basis[ties])])
                else:
                    leave = int(ties[np.argmax(np.abs(col[ties]))])
            leave_to_upper = bool(leave >= 0 and col[leave] < 0)
            if np.isinf(t_best):
                return UNBOUNDED
            t_best = max(t_best, 0.0)
            degenerate = degenerate + 1 if t_best <= 1e-12 else 0

            self.rhs -= t_best * col
            self.iterations += 1
            if leave < 0:
                # bound flip, basis unchanged
                self.at_upper[j] = not self.at_upper[j]
                continue

            entering_value = self.upper[j] - t_best if self.at_upper[j] else t_best
            old = basis[leave]
            piv = T[leave, j]
            T[leave] /= piv
            others = T[:, j].copy()
            others[leave] = 0.0
            nz = np.flatnonzero(others)
            prow = T[leave]
            nzc = np.flatnonzero(prow)
            # both the pivot column and row are sparse in these programs
            T[np.ix_(nz, nzc)] -= np.outer(others[nz], prow[nzc])
            d[nzc] -= d[j] * prow[nzc]
            self.rhs[leave] = entering_value
            basis[leave] = j
            is_basic[j] = True
            is_basic[old] = False
            self.at_upper[j] = False
            self.at_upper[old] = leave_to_upper
            np.clip(self.rhs, 0.0, np.where(np.isfinite(self.upper[basis]), self.upper[basis], np.inf),
                    out=self.rhs)


def solve_lp(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    lb=None,
    ub=None,
    max_iter: int = 50_000,
    deadline: float | None = None,
) -> LpResult:
    """Maximize ``c . x``; ``deadline`` is an absolute ``time.perf_counter()`` value."""
    c = np.asarray(c, dtype=float)
    nv = c.shape[0]
    A_ub = np.zeros((0, nv)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, nv)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).reshape(-1)
    A_eq = np.zeros((0, nv)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, nv)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).reshape(-1)
    lb = np.zeros(nv) if lb is None else np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if not (np.all(np.isfinite(lb)) and np.all(np.isfinite(ub))):
        raise ValueError("solve_lp needs finite variable bounds")
    if np.any(ub < lb - _EPS_FEAS):
        return LpResult(INFEASIBLE, None, -np.inf, 0)
    ub = np.maximum(ub, lb)

    # shift to 0 <= x' <= ub - lb
    span = ub - lb
    r_ub = b_ub - A_ub @ lb
    r_eq = b_eq - A_eq @ lb
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # columns: structural | slacks (one per <= row) | artificials (as needed)
    A = np.zeros((m, nv + m_ub))
    A[:m_ub, :nv] = A_ub
    A[m_ub:, :nv] = A_eq
    A[np.arange(m_ub), nv + np.arange(m_ub)] = 1.0
    rhs = np.concatenate([r_ub, r_eq])
    neg = rhs < 0
    A[neg] *= -1.0
    rhs[neg] *= -1.0

    basis = np.empty(m, dtype=int)
    need_art = []
    for r in range(m):
        if r < m_ub and not neg[r]:
            basis[r] = nv + r
        else:
            need_art.append(r)
    n_art = len(need_art)
    ncols = nv + m_ub + n_art
    T = np.zeros((m, ncols))
    T[:, : nv + m_ub] = A
    for k, r in enumerate(need_art):
        T[r, nv + m_ub + k] = 1.0
        basis[r] = nv + m_ub + k

    upper = np.concatenate([span, np.full(m_ub, np.inf), np.full(n_art, np.inf)])
    at_upper = np.zeros(ncols, dtype=bool)
    allowed = np.ones(ncols, dtype=bool)
    tab = _Tableau(T, rhs.copy(), basis, upper, at_upper, allowed)

    if n_art:
        cost1 = np.zeros(ncols)
        cost1[nv + m_ub:] = -1.0
        status = tab.run(cost1, max_iter, deadline)
        if status in (ITERATION_LIMIT, TIME_LIMIT):
            return LpResult(status, None, -np.inf, tab.iterations)
        infeas = tab.values()[nv + m_ub:].sum()
        if infeas > _EPS_FEAS * max(1.0, np.abs(rhs).max(initial=0.0)):
            return LpResult(INFEASIBLE, None, -np.inf, tab.iterations)
        # artificials are pinned at zero from here on
        tab.upper[nv + m_ub:] = 0.0
        tab.allowed[nv + m_ub:] = False

    cost2 = np.zeros(ncols)
    cost2[:nv] = c
    status = tab.run(cost2, max_iter, deadline)
    if status != OPTIMAL:
        return LpResult(status, None, -np.inf if status != UNBOUNDED else np.inf, tab.iterations)
    x = lb + np.clip(tab.values()[:nv], 0.0, span)
    return LpResult(OPTIMAL, x, float(c @ x), tab.iterations)
