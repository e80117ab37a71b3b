"""Reference computations that share no code with the solvers they check."""

from __future__ import annotations

import itertools
import math
from collections import Counter

import numpy as np


def lp_vertex_enumeration(c, A, b, lo, hi):
    """Minimum of ``c @ x`` over a bounded polyhedron by visiting every vertex.

    Returns ``(objective, x)`` or ``(None, None)`` when no vertex is feasible.
    All bounds must be finite.
    """
    c, A, b, lo, hi = (np.asarray(v, dtype=float) for v in (c, A, b, lo, hi))
    n = c.size
    eye = np.eye(n)
    G = np.vstack([A, eye, -eye])
    h = np.concatenate([b, hi, -lo])
    combos = np.array(list(itertools.combinations(range(G.shape[0]), n)))
    mats = G[combos]
    rhs = h[combos]
    dets = np.linalg.det(mats)
    ok = np.abs(dets) > 1e-10
    xs = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    feas = np.all(xs @ G.T <= h + 1e-9, axis=1)
    if not feas.any():
        return None, None
    xs = xs[feas]
    vals = xs @ c
    k = int(np.argmin(vals))
    return float(vals[k]), xs[k]


def balancing(F, K, delta):
    """Total balancing for flows ``F`` (rows may be a batch of flow vectors)."""
    F = np.atleast_2d(F)
    r = delta[None, :] - F @ K.T
    return np.maximum(-r, 0.0).sum(axis=1)


def bmin_grid_search(K, delta, lower, upper, rel_step=1e-3, refinements=6):
    """Smallest total balancing over a flow grid, then zoomed grids around the best point."""
    L = K.shape[1]
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    axes = []
    for l in range(L):
        span = upper[l] - lower[l]
        k = int(round(1.0 / rel_step)) if span > 0 else 0
        axes.append(np.linspace(lower[l], upper[l], k + 1))
    best_F, best = _grid_min(K, delta, axes)
    width = np.array([(upper[l] - lower[l]) * rel_step for l in range(L)])
    for _ in range(refinements):
        axes = [np.clip(np.linspace(best_F[l] - 2 * width[l], best_F[l] + 2 * width[l], 41), lower[l], upper[l]) for l in range(L)]
        F, val = _grid_min(K, delta, axes)
        if val <= best:
            best, best_F = val, F
        width = width / 10
    return best, best_F


def _grid_min(K, delta, axes):
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    vals = balancing(pts, K, delta)
    k = int(np.argmin(vals))
    return pts[k], float(vals[k])


def flow_polyhedron(K, delta, lower, upper, tau):
    """Halfspaces ``a @ F <= b`` describing all flows with total balancing <= tau.

    Total balancing is the largest sum of ``(K F - delta)_n`` over node subsets,
    so one halfspace per non-empty subset, plus the finite flow bounds.
    """
    N, L = K.shape
    rows, rhs = [], []
    for size in range(1, N + 1):
        for S in itertools.combinations(range(N), size):
            rows.append(K[list(S)].sum(axis=0))
            rhs.append(tau + delta[list(S)].sum())
    for l in range(L):
        e = np.zeros(L)
        e[l] = 1.0
        if np.isfinite(upper[l]):
            rows.append(e)
            rhs.append(upper[l])
        if np.isfinite(lower[l]):
            rows.append(-e)
            rhs.append(-lower[l])
    return np.array(rows), np.array(rhs)


def project_polyhedron(y, G, h, tol=1e-10):
    """Exact Euclidean projection by checking every face's affine hull."""
    n = y.size
    if np.all(G @ y <= h + tol):
        return y.copy()
    best, best_d = None, np.inf
    for size in range(1, n + 1):
        for S in itertools.combinations(range(G.shape[0]), size):
            A = G[list(S)]
            M = A @ A.T
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            x = y - A.T @ np.linalg.solve(M, A @ y - h[list(S)])
            if np.all(G @ x <= h + tol):
                d = float(np.linalg.norm(x - y))
                if d < best_d:
                    best, best_d = x, d
    if best is None:
        raise ValueError("empty polyhedron")
    return best


def projected_gradient_qp(G, h, mask=None, step=0.25, tol=1e-13, max_iter=500):
    """Projected gradient on ``sum(x[mask]**2)`` over ``G x <= h``.

    Only sensible when every variable is quadratic (or the flat ones are
    pinned by the constraints): the iteration contracts by ``1 - 2*step``.
    """
    n = G.shape[1]
    mask = np.ones(n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    x = project_polyhedron(np.ones(n), G, h)
    for _ in range(max_iter):
        nxt = project_polyhedron(x - step * 2.0 * mask * x, G, h)
        if np.max(np.abs(nxt - x)) < tol:
            return nxt
        x = nxt
    return x


def min_square_flows_pg(K, delta, lower, upper, tau, step=0.25):
    """Least-square flows among those whose total balancing is at most ``tau``."""
    G, h = flow_polyhedron(K, delta, np.asarray(lower, float), np.asarray(upper, float), tau)
    return projected_gradient_qp(G, h, step=step)


def min_norm_flows(K, delta):
    """Least-square flows meeting every node's mismatch exactly (sum of delta = 0)."""
    lap = K @ K.T
    return K.T @ np.linalg.pinv(lap) @ delta


def sorted_index_quantile(values, q):
    s = sorted(float(v) for v in values)
    pos = q * (len(s) - 1)
    i = int(math.floor(pos))
    j = min(i + 1, len(s) - 1)
    return s[i] + (pos - i) * (s[j] - s[i])


def histogram_by_edges(values, width):
    """Bin counts using explicit edge comparisons instead of floor division."""
    vals = [float(v) for v in values]
    if not vals:
        return {}
    kmin = int(math.floor(min(vals) / width)) - 1
    kmax = int(math.floor(max(vals) / width)) + 1
    edges = np.arange(kmin, kmax + 2) * width
    idx = np.searchsorted(edges, vals, side="right") - 1
    counts = Counter(int(kmin + i) for i in idx)
    return dict(sorted(counts.items()))


def dispatch_violations(F, B, C, B_min, K, deltas, lower, upper, tol=1e-6):
    """Count hours breaking each dispatch invariant (all arrays hours-first)."""
    F, B, C = np.atleast_2d(F), np.atleast_2d(B), np.atleast_2d(C)
    deltas = np.atleast_2d(deltas)
    B_min = np.atleast_1d(B_min)
    book = np.abs(deltas - F @ K.T - C + B).max(axis=1)
    return {
        "bookkeeping": int(np.sum(book > tol)),
        "complementarity": int(np.sum(np.minimum(B, C).max(axis=1) != 0)),
        "negative_parts": int(np.sum((B.min(axis=1) < 0) | (C.min(axis=1) < 0))),
        "flow_bounds": int(np.sum(np.any((F > upper + tol) | (F < lower - tol), axis=1))),
        "lower_bound": int(np.sum(B_min < np.maximum(-deltas.sum(axis=1), 0.0) - tol)),
        "global_balance": int(np.sum(np.abs(B.sum(axis=1) - C.sum(axis=1) + deltas.sum(axis=1)) > tol)),
    }
