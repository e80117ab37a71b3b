"""Primal active-set method for ``min sum(x[q]**2)`` under linear inequalities.

Only a designated subset ``q`` of the variables carries curvature, so the
Hessian is diagonal and merely semidefinite. The gradient vanishes on the
flat variables, so there is never a zero-curvature descent ray: each
equality-constrained subproblem is solved in the null space of the working
rows (a complete QR kept up to date as rows enter and leave, which also
yields the multipliers) with a
minimum-norm step. Rows only enter the working set when they block a step
that every working row leaves unchanged, so the set stays linearly
independent and ``R`` is non-singular.

Bounds are folded into the row set (upper bounds first, then lower bounds)
so that add/drop decisions use a single, fixed row numbering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr, qr_delete, qr_insert, solve_triangular

from .lp import BoundedLP, solve_lp
from .report import (
    INFEASIBLE,
    NUMERICAL_FAILURE,
    OPTIMAL,
    SolveReport,
    _as_problem_arrays,
    constraint_violation,
)


@dataclass(frozen=True)
class BoxQP:
    quadratic: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __init__(self, quadratic, A_ub=None, b_ub=None, lower=None, upper=None):
        q = np.asarray(quadratic, dtype=bool).reshape(-1).copy()
        A, b, lo, hi = _as_problem_arrays(q, A_ub, b_ub, lower, upper)
        q.setflags(write=False)
        object.__setattr__(self, "quadratic", q)
        object.__setattr__(self, "A_ub", A)
        object.__setattr__(self, "b_ub", b)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def n(self) -> int:
        return self.quadratic.size

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.sum(x[self.quadratic] ** 2))

    def rows(self):
        """All constraints as ``G @ x <= h`` with bounds appended."""
        n = self.n
        eye = np.eye(n)
        up = np.flatnonzero(np.isfinite(self.upper))
        dn = np.flatnonzero(np.isfinite(self.lower))
        G = np.vstack([self.A_ub, eye[up], -eye[dn]])
        h = np.concatenate([self.b_ub, self.upper[up], -self.lower[dn]])
        return G, h


def _newton_step(Z: np.ndarray, xq: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Minimiser step of ``sum((x + p)[q]**2)`` over ``p = Z y``.

    The curved part is ``-x_q`` projected onto the range of ``Z_q``, found
    with a rank-revealing QR; ``y`` is the basic solution, so directions of
    ``Z`` that move only flat variables are not used.
    """
    Zq = Z[q]
    Qz, Rz, piv = qr(Zq, mode="economic", pivoting=True, check_finite=False)
    d = np.abs(np.diag(Rz))
    r = int(np.sum(d > 1e-10 * max(1.0, float(d[0]) if d.size else 0.0)))
    if r == 0:
        return np.zeros(Z.shape[0])
    c = -(Qz[:, :r].T @ xq)
    y = np.zeros(Z.shape[1])
    y[piv[:r]] = solve_triangular(Rz[:r, :r], c, check_finite=False)
    return Z @ y


def _seed_working_set(G, h, x, hint, tol) -> list[int]:
    """Active hinted rows, thinned to a linearly independent subset."""
    if hint is None:
        return []
    hint = np.asarray(hint, dtype=int)
    cand = hint[h[hint] - G[hint] @ x <= tol]
    if cand.size == 0:
        return []
    _, R, piv = qr(G[cand].T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    keep = diag > 1e-9 * max(1.0, float(diag[0]))
    return sorted(int(i) for i in cand[piv[keep]])


def projected_gradient_norm(problem: BoxQP, x, tol: float = 1e-9) -> float:
    """Norm of the steepest feasible descent direction at ``x``.

    Solves ``min ||g + G_a^T lam||`` over ``lam >= 0`` for the active rows
    ``G_a`` by non-negative least squares; the residual is zero exactly at a
    KKT point.
    """
    from scipy.optimize import nnls

    G, h = problem.rows()
    x = np.asarray(x, dtype=float)
    g = 2.0 * problem.quadratic * x
    slack = h - G @ x
    active = slack <= tol * max(1.0, float(np.max(np.abs(h), initial=0.0)))
    if not active.any():
        return float(np.linalg.norm(g))
    _, rnorm = nnls(G[active].T, -g)
    return float(rnorm)


def solve_qp(
    problem: BoxQP,
    tol: float = 1e-9,
    feas_tol: float = 1e-7,
    x0=None,
    max_iter: int | None = None,
    working_hint=None,
) -> SolveReport:
    """Minimise ``sum(x[quadratic]**2)`` over the feasible polyhedron.

    ``x0`` must be feasible when given; otherwise a feasible start is found
    with a zero-cost LP. ``working_hint`` lists row indices (numbered as in
    ``BoxQP.rows``) to seed the working set; rows that are not active at the
    start point or are linearly dependent on earlier ones are skipped.
    """
    A, b, lo, hi = problem.A_ub, problem.b_ub, problem.lower, problem.upper
    n = problem.n
    scale = max(1.0, float(np.max(np.abs(b), initial=0.0)), float(np.max(np.abs(np.r_[lo, hi][np.isfinite(np.r_[lo, hi])]), initial=0.0)))
    iterations = 0
    if x0 is None or constraint_violation(np.asarray(x0, dtype=float), A, b, lo, hi) > feas_tol * scale:
        start = solve_lp(BoundedLP(np.zeros(n), A, b, lo, hi), feas_tol=feas_tol)
        iterations += start.iterations
        if start.status != OPTIMAL:
            status = INFEASIBLE if start.status == INFEASIBLE else NUMERICAL_FAILURE
            return SolveReport(start.x, float("nan"), status, iterations, start.max_violation)
        x = start.x.copy()
    else:
        x = np.asarray(x0, dtype=float).copy()

    G, h = problem.rows()
    nrows = G.shape[0]
    quad = problem.quadratic
    hdiag = 2.0 * quad.astype(float)
    if max_iter is None:
        max_iter = 10 * (n + nrows) + 50
    working = _seed_working_set(G, h, x, working_hint, feas_tol * scale)
    in_w = np.zeros(nrows, dtype=bool)
    in_w[working] = True
    step_tol = tol * scale
    status = NUMERICAL_FAILURE

    # complete QR of the working rows (as columns), updated on add / drop
    if working:
        Q, R = np.linalg.qr(G[working].T, mode="complete")
    else:
        Q, R = np.eye(n), np.zeros((n, 0))

    for _ in range(max_iter):
        iterations += 1
        g = hdiag * x
        k = len(working)
        Z = Q[:, k:]
        p = _newton_step(Z, x[quad], quad) if Z.shape[1] else None
        if p is not None and np.max(np.abs(p), initial=0.0) <= step_tol:
            p = None

        if p is None:
            if not working:
                status = OPTIMAL
                break
            mult = solve_triangular(R[:k], -(Q[:, :k].T @ g))
            worst = int(np.argmin(mult))
            if mult[worst] >= -tol * max(1.0, float(np.max(np.abs(g), initial=0.0))):
                status = OPTIMAL
                break
            in_w[working[worst]] = False
            del working[worst]
            Q, R = qr_delete(Q, R, worst, 1, which="col", check_finite=False)
            continue

        Gp = G @ p
        slack = np.maximum(h - G @ x, 0.0)
        block = (~in_w) & (Gp > 1e-12 * np.max(np.abs(p)))
        alpha = 1.0
        hit = -1
        if block.any():
            idx = np.flatnonzero(block)
            ratios = slack[idx] / Gp[idx]
            j = int(np.argmin(ratios))
            if ratios[j] < alpha:
                alpha = float(ratios[j])
                hit = int(idx[j])
        x = x + alpha * p
        if hit >= 0:
            Q, R = qr_insert(Q, R, G[hit], k, which="col", check_finite=False)
            working.append(hit)
            in_w[hit] = True

    viol = constraint_violation(x, A, b, lo, hi)
    if status == OPTIMAL and viol > feas_tol * scale:
        status = NUMERICAL_FAILURE
    return SolveReport(x, problem.objective(x), status, iterations, viol)
