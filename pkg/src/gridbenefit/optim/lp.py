"""Bounded-variable primal simplex on a dense tableau.

Problems have the form::

    min  c @ x
    s.t. A_ub @ x <= b_ub
         lower <= x <= upper        (entries may be +-inf)

Every row gets a slack in ``[0, inf)``. Rows that are violated at the
starting point also get an artificial variable; phase 1 drives those to
zero, after which they are clamped to ``[0, 0]`` and can never re-enter.

Pivoting is Dantzig's rule with lowest-index tie breaks. After a run of
degenerate pivots the solver switches to Bland's rule until the objective
moves again, which rules out cycling and keeps the output a pure function of
the input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .report import (
    INFEASIBLE,
    NUMERICAL_FAILURE,
    OPTIMAL,
    UNBOUNDED,
    SolveReport,
    _as_problem_arrays,
    constraint_violation,
)

_PIVOT_TOL = 1e-11
_REFACTOR_EVERY = 40
_DEGENERATE_STREAK = 8


@dataclass(frozen=True)
class BoundedLP:
    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __init__(self, c, A_ub=None, b_ub=None, lower=None, upper=None):
        c = np.asarray(c, dtype=float).reshape(-1).copy()
        if not np.all(np.isfinite(c)):
            raise ValueError("objective coefficients must be finite")
        A, b, lo, hi = _as_problem_arrays(c, A_ub, b_ub, lower, upper)
        c.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A_ub", A)
        object.__setattr__(self, "b_ub", b)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def n(self) -> int:
        return self.c.size


@dataclass
class _Tableau:
    M: np.ndarray  # original constraint columns [A | I | -E_art]
    rhs: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    basis: np.ndarray
    x: np.ndarray
    T: np.ndarray = field(init=False)
    is_basic: np.ndarray = field(init=False)

    def __post_init__(self):
        self.is_basic = np.zeros(self.M.shape[1], dtype=bool)
        self.is_basic[self.basis] = True
        self.refactor()

    def refactor(self):
        B = self.M[:, self.basis]
        self.T = np.linalg.solve(B, self.M)
        nonbasic = ~self.is_basic
        r = self.rhs - self.M[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = np.linalg.solve(B, r)


def _simplex(tab: _Tableau, cost: np.ndarray, enterable: np.ndarray, tol: float, max_iter: int):
    """Run primal simplex iterations in place. Returns (status, iterations)."""
    it = 0
    since_refactor = 0
    degenerate = 0
    m = tab.basis.size
    while it < max_iter:
        if since_refactor >= _REFACTOR_EVERY:
            tab.refactor()
            since_refactor = 0
        T, x, lo, hi = tab.T, tab.x, tab.lo, tab.hi
        d = cost - cost[tab.basis] @ T
        cand = enterable & ~tab.is_basic
        inc = cand & (d < -tol) & (x < hi)
        dec = cand & (d > tol) & (x > lo)
        eligible = inc | dec
        if not eligible.any():
            return OPTIMAL, it
        if degenerate >= _DEGENERATE_STREAK:
            j = int(np.flatnonzero(eligible)[0])
        else:
            score = np.where(eligible, np.abs(d), -1.0)
            j = int(np.argmax(score))
        sigma = 1.0 if inc[j] else -1.0

        col = sigma * T[:, j]
        xb = x[tab.basis]
        lob = lo[tab.basis]
        hib = hi[tab.basis]
        ratios = np.full(m, np.inf)
        down = col > _PIVOT_TOL
        up = col < -_PIVOT_TOL
        with np.errstate(invalid="ignore"):
            ratios[down] = (xb[down] - lob[down]) / col[down]
            ratios[up] = (hib[up] - xb[up]) / (-col[up])
        ratios = np.where(np.isnan(ratios), np.inf, np.maximum(ratios, 0.0))
        alpha_b = float(ratios.min()) if m else np.inf
        flip = hi[j] - lo[j]

        if not np.isfinite(alpha_b) and not np.isfinite(flip):
            return UNBOUNDED, it

        it += 1
        if flip <= alpha_b:
            x[j] = hi[j] if sigma > 0 else lo[j]
            x[tab.basis] = xb - flip * col
            degenerate = 0
            continue

        ties = np.flatnonzero(ratios <= alpha_b + 1e-12 * max(1.0, alpha_b))
        if degenerate >= _DEGENERATE_STREAK:
            r = int(ties[np.argmin(tab.basis[ties])])
        else:
            mags = np.abs(col[ties])
            best = ties[mags >= mags.max() * (1 - 1e-9)]
            r = int(best[np.argmin(tab.basis[best])])
        leave = int(tab.basis[r])

        x[tab.basis] = xb - alpha_b * col
        x[leave] = lo[leave] if col[r] > 0 else hi[leave]
        x[j] = x[j] + sigma * alpha_b

        piv = T[r, j]
        T[r] /= piv
        others = T[:, j].copy()
        others[r] = 0.0
        T -= np.outer(others, T[r])
        tab.basis[r] = j
        tab.is_basic[leave] = False
        tab.is_basic[j] = True
        since_refactor += 1
        degenerate = degenerate + 1 if alpha_b <= 1e-12 else 0
    return NUMERICAL_FAILURE, it


def _initial_values(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
    return x.astype(float)


def solve_lp(problem: BoundedLP, tol: float = 1e-9, feas_tol: float = 1e-7, max_iter: int | None = None) -> SolveReport:
    """Solve ``problem`` to optimality or report why it cannot be."""
    c, A, b, lo, hi = problem.c, problem.A_ub, problem.b_ub, problem.lower, problem.upper
    m, n = A.shape
    if np.any(lo > hi):
        return SolveReport(_initial_values(lo, hi), float("nan"), INFEASIBLE, 0, float("inf"))
    if max_iter is None:
        max_iter = 50 * (m + n) + 100

    x0 = _initial_values(lo, hi)
    if m == 0:
        # Bounds only: every variable sits at the bound its cost points to.
        x = x0.copy()
        for j in range(n):
            if c[j] > 0:
                x[j] = lo[j]
            elif c[j] < 0:
                x[j] = hi[j]
        if not np.all(np.isfinite(x)):
            return SolveReport(x, float("-inf"), UNBOUNDED, 0, 0.0)
        return SolveReport(x, float(c @ x), OPTIMAL, 0, 0.0)

    resid = b - A @ x0
    art_rows = np.flatnonzero(resid < 0)
    k = art_rows.size
    ntot = n + m + k
    M = np.zeros((m, ntot))
    M[:, :n] = A
    M[:, n : n + m] = np.eye(m)
    M[art_rows, n + m + np.arange(k)] = -1.0
    lo_all = np.concatenate([lo, np.zeros(m + k)])
    hi_all = np.concatenate([hi, np.full(m + k, np.inf)])
    x = np.concatenate([x0, np.zeros(m + k)])
    basis = np.arange(n, n + m)
    basis[art_rows] = n + m + np.arange(k)
    tab = _Tableau(M, b.copy(), lo_all, hi_all, basis, x)

    iterations = 0
    scale = max(1.0, float(np.max(np.abs(b), initial=0.0)))
    enterable = np.ones(ntot, dtype=bool)
    if k:
        cost1 = np.zeros(ntot)
        cost1[n + m :] = 1.0
        status, it = _simplex(tab, cost1, enterable, tol, max_iter)
        iterations += it
        if status != OPTIMAL:
            return SolveReport(tab.x[:n].copy(), float("nan"), NUMERICAL_FAILURE, iterations, float("inf"))
        tab.refactor()
        infeas = float(tab.x[n + m :].sum())
        if infeas > feas_tol * scale:
            xs = tab.x[:n].copy()
            return SolveReport(xs, float("nan"), INFEASIBLE, iterations, constraint_violation(xs, A, b, lo, hi))
        tab.hi[n + m :] = 0.0
        enterable[n + m :] = False

    cost2 = np.concatenate([c, np.zeros(m + k)])
    status, it = _simplex(tab, cost2, enterable, tol, max_iter - iterations)
    iterations += it
    tab.refactor()
    xs = tab.x[:n].copy()
    # nonbasic structurals sit exactly on bounds; basics may drift by rounding
    xs = np.clip(xs, lo, hi)
    viol = constraint_violation(xs, A, b, lo, hi)
    if status == OPTIMAL and viol > feas_tol * scale:
        status = NUMERICAL_FAILURE
    obj = float(c @ xs) if status == OPTIMAL else (float("-inf") if status == UNBOUNDED else float("nan"))
    return SolveReport(xs, obj, status, iterations, viol)
