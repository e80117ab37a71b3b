"""Hourly two-step dispatch: least total balancing, then least-square flows.

Variables of both subproblems are ``x = [F_1..F_L', s_1..s_N]`` where only
links with a non-zero cap in some direction are kept (closed links carry no
flow and are fixed to zero). ``s_n`` is the balancing slack of node ``n``::

    s_n >= 0,   s_n >= (K F)_n - delta_n,   -cap_backward <= F <= cap_forward

Step 1 minimises ``sum(s)`` and yields ``B_min``. Step 2 minimises
``sum(F**2)`` with the extra row ``sum(s) <= B_min + eps``, starting from the
step-1 vertex, which is feasible for it. Balancing and curtailment are then
read off the residual ``delta - K F`` pointwise.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import CapacityLayout, Topology
from .optim.lp import BoundedLP, solve_lp
from .optim.qp import BoxQP, solve_qp
from .series import HOURS_PER_YEAR, MismatchSeries

EPS_REL = 1e-8
EPS_ABS = 1e-9


class SolverError(RuntimeError):
    def __init__(self, step: str, status: str, hour: int | None = None):
        where = f" at hour {hour}" if hour is not None else ""
        super().__init__(f"{step} solve {status}{where}")
        self.step = step
        self.status = status
        self.hour = hour


@dataclass(frozen=True)
class HourlyDispatch:
    F: np.ndarray
    B: np.ndarray
    C: np.ndarray
    B_min: float
    eps: float = 0.0


@dataclass(frozen=True)
class DispatchResult:
    topology: Topology
    layout: CapacityLayout
    F: np.ndarray  # hours x links
    B: np.ndarray  # hours x nodes
    C: np.ndarray  # hours x nodes
    B_min: np.ndarray  # hours
    eps: np.ndarray  # hours

    @property
    def hours(self) -> int:
        return self.B_min.size

    def hour(self, t: int) -> HourlyDispatch:
        return HourlyDispatch(self.F[t], self.B[t], self.C[t], float(self.B_min[t]), float(self.eps[t]))

    def post_mismatch(self, deltas: np.ndarray) -> np.ndarray:
        """Mismatch left at each node after transmission, ``delta - K F``."""
        return deltas - self.F @ self.topology.K.T


def default_eps(delta: np.ndarray) -> float:
    return max(EPS_REL * float(np.maximum(-delta, 0.0).sum()), EPS_ABS)


def _aligned(layout: CapacityLayout, topo: Topology) -> CapacityLayout:
    return layout if layout.pairs == topo.pairs else layout.aligned_to(topo)


def _solve_hour(delta: np.ndarray, K: np.ndarray, lower: np.ndarray, upper: np.ndarray, eps: float | None):
    N, L = K.shape
    if eps is None:
        eps = default_eps(delta)
    F = np.zeros(L)
    open_links = (lower < 0) | (upper > 0)
    if open_links.any() and (delta > 0).any() and (delta < 0).any():
        Ko = K[:, open_links]
        Lo = Ko.shape[1]
        A = np.hstack([Ko, -np.eye(N)])
        lo = np.concatenate([lower[open_links], np.zeros(N)])
        hi = np.concatenate([upper[open_links], np.full(N, np.inf)])
        c = np.concatenate([np.zeros(Lo), np.ones(N)])
        lp = solve_lp(BoundedLP(c, A, delta, lo, hi))
        if not lp.ok:
            raise SolverError("step-1 LP", lp.status)
        b_min = float(lp.x[Lo:].sum())

        A2 = np.vstack([A, np.concatenate([np.zeros(Lo), np.ones(N)])])
        b2 = np.concatenate([delta, [b_min + eps]])
        quad = np.concatenate([np.ones(Lo, dtype=bool), np.zeros(N, dtype=bool)])
        qp2 = BoxQP(quad, A2, b2, lo, hi)
        # the B_min row and the node rows active at the step-1 vertex are
        # usually active at the optimum too
        qp = solve_qp(qp2, x0=lp.x, working_hint=np.arange(N + 1))
        if not qp.ok:
            raise SolverError("step-2 QP", qp.status)
        F[open_links] = np.clip(qp.x[:Lo], lower[open_links], upper[open_links])
    else:
        # no usable link, or every node on the same side: no trade can lower
        # total balancing and zero flow is the least-square choice
        b_min = float(np.maximum(-delta, 0.0).sum())
    r = delta - K @ F
    return F, np.maximum(-r, 0.0), np.maximum(r, 0.0), b_min, eps


def dispatch_hour(delta, topo: Topology, layout: CapacityLayout, eps: float | None = None) -> HourlyDispatch:
    delta = np.asarray(delta, dtype=float).reshape(-1)
    if delta.size != topo.n_nodes:
        raise ValueError(f"expected {topo.n_nodes} mismatch values, got {delta.size}")
    if not np.all(np.isfinite(delta)):
        raise ValueError("mismatch vector must be finite")
    if eps is not None and eps < 0:
        raise ValueError("eps must be non-negative")
    layout = _aligned(layout, topo)
    F, B, C, b_min, e = _solve_hour(delta, topo.K, layout.lower, layout.upper, eps)
    return HourlyDispatch(F, B, C, b_min, e)


def _solve_block(args):
    deltas, K, lower, upper, eps, first_hour = args
    T = deltas.shape[0]
    N, L = K.shape
    F = np.empty((T, L))
    B = np.empty((T, N))
    C = np.empty((T, N))
    bmin = np.empty(T)
    used = np.empty(T)
    for t in range(T):
        try:
            F[t], B[t], C[t], bmin[t], used[t] = _solve_hour(deltas[t], K, lower, upper, eps)
        except SolverError as exc:
            raise SolverError(exc.step, exc.status, first_hour + t) from None
    return F, B, C, bmin, used


def mismatch_matrix(ms: Sequence[MismatchSeries], topo: Topology | None = None) -> np.ndarray:
    """Stack mismatch series into an hours x nodes array in topology order."""
    if not ms:
        raise ValueError("no mismatch series given")
    lengths = {len(m) for m in ms}
    if len(lengths) != 1:
        raise ValueError(f"mismatch series have different lengths: {sorted(lengths)}")
    if topo is not None:
        by_node = {m.node: m for m in ms}
        if sorted(by_node) != sorted(topo.node_ids) or len(ms) != topo.n_nodes:
            raise ValueError("mismatch series do not match the topology's nodes")
        ms = [by_node[n] for n in topo.node_ids]
    return np.column_stack([m.delta for m in ms])


def dispatch_series(
    ms: Sequence[MismatchSeries] | np.ndarray,
    topo: Topology,
    layout: CapacityLayout,
    eps: float | None = None,
    threads: int = 1,
) -> DispatchResult:
    """Solve every hour independently; ``threads`` worker processes share the hours."""
    deltas = ms if isinstance(ms, np.ndarray) else mismatch_matrix(ms, topo)
    deltas = np.asarray(deltas, dtype=float)
    if deltas.ndim != 2 or deltas.shape[1] != topo.n_nodes or deltas.shape[0] == 0:
        raise ValueError("mismatch array must be hours x nodes and non-empty")
    if not np.all(np.isfinite(deltas)):
        raise ValueError("mismatch values must be finite")
    layout = _aligned(layout, topo)
    T = deltas.shape[0]
    threads = max(1, min(int(threads or 1), T))
    K, lower, upper = np.asarray(topo.K), np.asarray(layout.lower), np.asarray(layout.upper)

    if threads == 1:
        parts = [_solve_block((deltas, K, lower, upper, eps, 0))]
    else:
        edges = np.linspace(0, T, 4 * threads + 1).astype(int)
        jobs = [(deltas[a:b], K, lower, upper, eps, int(a)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_solve_block, jobs))

    F, B, C, bmin, used = (np.concatenate([p[i] for p in parts]) for i in range(5))
    for arr in (F, B, C, bmin, used):
        arr.setflags(write=False)
    return DispatchResult(topo, layout, F, B, C, bmin, used)


def available_threads() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def zero_balancing(ms: Sequence[MismatchSeries] | np.ndarray) -> float:
    """Annual balancing energy (TWh) with no transmission at all."""
    deltas = ms if isinstance(ms, np.ndarray) else mismatch_matrix(ms)
    if deltas.size == 0:
        raise ValueError("empty mismatch series")
    return HOURS_PER_YEAR * float(np.maximum(-deltas, 0.0).mean(axis=0).sum()) / 1000.0


def unconstrained_balancing(ms: Sequence[MismatchSeries] | np.ndarray) -> float:
    """Annual balancing energy (TWh) with unlimited transmission: only the net deficit remains."""
    deltas = ms if isinstance(ms, np.ndarray) else mismatch_matrix(ms)
    if deltas.size == 0:
        raise ValueError("empty mismatch series")
    return HOURS_PER_YEAR * float(np.maximum(-deltas.sum(axis=1), 0.0).mean()) / 1000.0
