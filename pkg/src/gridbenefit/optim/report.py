from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical-failure"


@dataclass(frozen=True)
class SolveReport:
    x: np.ndarray
    objective: float
    status: str
    iterations: int
    max_violation: float

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def _as_problem_arrays(c_or_n, A_ub, b_ub, lower, upper):
    if np.isscalar(c_or_n):
        n = int(c_or_n)
    else:
        n = len(c_or_n)
    A = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    if A.size == 0:
        A = A.reshape(0, n)
    b = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).reshape(-1)
    lo = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float).reshape(-1).copy()
    hi = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float).reshape(-1).copy()
    if A.shape != (b.size, n):
        raise ValueError(f"A_ub has shape {A.shape}, expected ({b.size}, {n})")
    if lo.size != n or hi.size != n:
        raise ValueError("bounds must have one entry per variable")
    if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(np.isnan(b)) or not np.all(np.isfinite(A)):
        raise ValueError("problem data contains NaN or infinite matrix entries")
    if np.any(lo > hi) or np.any(lo == np.inf) or np.any(hi == -np.inf):
        raise ValueError("every variable needs lower <= upper with a finite side")
    for arr in (A, b, lo, hi):
        arr.setflags(write=False)
    return A, b, lo, hi


def constraint_violation(x, A_ub, b_ub, lower, upper) -> float:
    """Largest amount by which ``x`` breaks a row or a bound (0 when feasible)."""
    viol = 0.0
    if len(b_ub):
        viol = max(viol, float(np.max(A_ub @ x - b_ub, initial=0.0)))
    viol = max(viol, float(np.max(lower - x, initial=0.0)))
    viol = max(viol, float(np.max(x - upper, initial=0.0)))
    return viol
