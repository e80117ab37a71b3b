"""Network topology, directed capacity layouts and layout interpolation.

Sign convention used everywhere: link ``l`` runs ``from -> to``; a positive
flow moves power in that direction. A layout stores two non-negative
magnitudes per link and the admissible flow range is
``-cap_backward <= F <= cap_forward``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class TopologyError(ValueError):
    pass


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class Node:
    id: str
    mean_load: float = 1.0
    gamma: float = 1.0
    alpha_w: float = 0.7

    def __post_init__(self):
        if not self.mean_load > 0:
            raise ValueError(f"node {self.id}: mean_load must be positive")
        if not 0.0 <= self.alpha_w <= 1.0:
            raise ValueError(f"node {self.id}: alpha_w must lie in [0, 1]")
        if not self.gamma >= 0:
            raise ValueError(f"node {self.id}: gamma must be non-negative")


@dataclass(frozen=True)
class Link:
    id: int
    src: str
    dst: str

    def __post_init__(self):
        if self.src == self.dst:
            raise TopologyError(f"link {self.id} is a self-loop at {self.src}")


@dataclass(frozen=True)
class Topology:
    nodes: tuple[Node, ...]
    links: tuple[Link, ...]
    K: np.ndarray = field(repr=False, compare=False)

    @property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes)

    @property
    def pairs(self) -> tuple[tuple[str, str], ...]:
        return tuple((l.src, l.dst) for l in self.links)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_links(self) -> int:
        return len(self.links)

    def index(self, node_id: str) -> int:
        return self.node_ids.index(node_id)

    def mean_loads(self) -> np.ndarray:
        return np.array([n.mean_load for n in self.nodes])


def incidence_matrix(node_ids: Sequence[str], links: Sequence[Link]) -> np.ndarray:
    pos = {nid: i for i, nid in enumerate(node_ids)}
    K = np.zeros((len(node_ids), len(links)))
    for l, link in enumerate(links):
        K[pos[link.src], l] = 1.0
        K[pos[link.dst], l] = -1.0
    return K


def build_topology(nodes: Sequence[Node], links: Sequence[Link]) -> Topology:
    """Validate the graph and build its node-by-link incidence matrix."""
    nodes = tuple(nodes)
    links = tuple(links)
    ids = [n.id for n in nodes]
    if len(set(ids)) != len(ids):
        raise TopologyError("duplicate node ids")
    known = set(ids)
    seen = set()
    for link in links:
        for end in (link.src, link.dst):
            if end not in known:
                raise TopologyError(f"link {link.id} references unknown node {end!r}")
        key = frozenset((link.src, link.dst))
        if key in seen:
            raise TopologyError(f"duplicate link between {link.src} and {link.dst}")
        seen.add(key)

    adj: dict[str, list[str]] = {i: [] for i in ids}
    for link in links:
        adj[link.src].append(link.dst)
        adj[link.dst].append(link.src)
    if ids:
        reached = {ids[0]}
        queue = deque([ids[0]])
        while queue:
            for nb in adj[queue.popleft()]:
                if nb not in reached:
                    reached.add(nb)
                    queue.append(nb)
        if len(reached) != len(ids):
            missing = sorted(known - reached)
            raise TopologyError(f"graph is disconnected; unreachable: {', '.join(missing)}")

    K = incidence_matrix(ids, links)
    K.setflags(write=False)
    return Topology(nodes, links, K)


def line_topology(ids: Sequence[str]) -> Topology:
    nodes = [Node(i) for i in ids]
    links = [Link(k, ids[k], ids[k + 1]) for k in range(len(ids) - 1)]
    return build_topology(nodes, links)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float).reshape(-1)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CapacityLayout:
    pairs: tuple[tuple[str, str], ...]
    forward: np.ndarray
    backward: np.ndarray
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((str(a), str(b)) for a, b in self.pairs))
        object.__setattr__(self, "forward", _frozen(self.forward))
        object.__setattr__(self, "backward", _frozen(self.backward))
        n = len(self.pairs)
        if self.forward.size != n or self.backward.size != n:
            raise LayoutError("one forward and one backward cap per link required")
        for arr in (self.forward, self.backward):
            if np.any(np.isnan(arr)) or np.any(arr < 0):
                raise LayoutError("capacities must be non-negative numbers")

    def __eq__(self, other):
        if not isinstance(other, CapacityLayout):
            return NotImplemented
        return (
            self.pairs == other.pairs
            and np.array_equal(self.forward, other.forward)
            and np.array_equal(self.backward, other.backward)
        )

    def __hash__(self):
        return hash((self.pairs, self.forward.tobytes(), self.backward.tobytes()))

    @property
    def lower(self) -> np.ndarray:
        return -self.backward

    @property
    def upper(self) -> np.ndarray:
        return self.forward

    def renamed(self, name: str) -> "CapacityLayout":
        return CapacityLayout(self.pairs, self.forward, self.backward, name)

    def is_unconstrained(self) -> bool:
        return bool(np.all(np.isinf(self.forward)) and np.all(np.isinf(self.backward)))

    def aligned_to(self, topo: Topology) -> "CapacityLayout":
        """Reorder (and re-orient) this layout to the link order of ``topo``."""
        lookup = {}
        for i, (a, b) in enumerate(self.pairs):
            lookup[(a, b)] = (self.forward[i], self.backward[i])
            lookup[(b, a)] = (self.backward[i], self.forward[i])
        if len(self.pairs) != topo.n_links:
            raise LayoutError(f"layout has {len(self.pairs)} links, topology has {topo.n_links}")
        fw, bw = [], []
        for pair in topo.pairs:
            if pair not in lookup:
                raise LayoutError(f"layout has no entry for link {pair[0]}-{pair[1]}")
            f, b = lookup[pair]
            fw.append(f)
            bw.append(b)
        return CapacityLayout(topo.pairs, fw, bw, self.name)


def uniform_layout(topo: Topology, cap: float, name: str = "") -> CapacityLayout:
    caps = np.full(topo.n_links, float(cap))
    return CapacityLayout(topo.pairs, caps, caps, name)


def zero_layout(topo: Topology) -> CapacityLayout:
    return uniform_layout(topo, 0.0, "zero")


def infinite_layout(topo: Topology) -> CapacityLayout:
    return uniform_layout(topo, np.inf, "infinite")


def total_capacity(layout: CapacityLayout) -> float:
    """Sum over links of the larger directional cap, in GW.

    A link with one unlimited direction (the "no realistic limit" entries of
    published NTC tables) counts with its finite direction. A link that is
    unlimited both ways has no meaningful size and is rejected.
    """
    both_inf = np.isinf(layout.forward) & np.isinf(layout.backward)
    if both_inf.any():
        bad = [layout.pairs[i] for i in np.flatnonzero(both_inf)]
        raise LayoutError(f"total capacity undefined: unlimited link(s) {bad}")
    fw = np.where(np.isinf(layout.forward), layout.backward, layout.forward)
    bw = np.where(np.isinf(layout.backward), layout.forward, layout.backward)
    return float(np.sum(np.maximum(fw, bw)))


def _check_same_links(x: CapacityLayout, y: CapacityLayout):
    if x.pairs != y.pairs:
        raise LayoutError("layouts are defined on different link sets")


def interpolate_a(present: CapacityLayout, q99: CapacityLayout, a: float) -> CapacityLayout:
    """Scale today's caps by ``a``, never beyond the 99 % quantile caps."""
    if not a >= 0:
        raise ValueError("scale factor a must be non-negative")
    _check_same_links(present, q99)

    def scaled(cap):
        # 0 * inf would be NaN; an unlimited direction scaled by 0 is closed
        return np.where(np.isinf(cap), np.inf if a > 0 else 0.0, a * np.where(np.isinf(cap), 0.0, cap))

    fw = np.minimum(scaled(present.forward), q99.forward)
    bw = np.minimum(scaled(present.backward), q99.backward)
    return CapacityLayout(present.pairs, fw, bw, f"A(a={a:g})")


def interpolate_b(q99: CapacityLayout, b: float) -> CapacityLayout:
    if not 0.0 <= b <= 1.0:
        raise ValueError("reduction factor b must lie in [0, 1]")
    return CapacityLayout(q99.pairs, b * q99.forward, b * q99.backward, f"B(b={b:g})")


@dataclass(frozen=True)
class FlowQuantileTable:
    """Per-link sorted signed flows of an unconstrained dispatch run."""

    pairs: tuple[tuple[str, str], ...]
    sorted_flows: np.ndarray  # hours x links, each column ascending

    @classmethod
    def from_flows(cls, pairs, flows) -> "FlowQuantileTable":
        flows = np.asarray(flows, dtype=float)
        if flows.ndim != 2 or flows.shape[0] == 0:
            raise ValueError("need a non-empty hours x links flow array")
        if flows.shape[1] != len(pairs):
            raise ValueError("flow columns do not match the link list")
        s = np.sort(flows, axis=0)
        s.setflags(write=False)
        return cls(tuple(pairs), s)

    def quantile(self, q: float) -> np.ndarray:
        from .series import quantiles

        return quantiles(self.sorted_flows, [q], presorted=True)[0]


def interpolate_c(flow_stats: FlowQuantileTable, c: float) -> CapacityLayout:
    """Caps that let the recorded unconstrained flow pass ``c`` % of the time per direction."""
    if not 50.0 <= c <= 100.0:
        raise ValueError("c must lie in [50, 100]")
    if flow_stats.sorted_flows.shape[0] == 0:
        raise ValueError("empty flow series")
    hi = flow_stats.quantile(c / 100.0)
    lo = flow_stats.quantile(1.0 - c / 100.0)
    fw = np.maximum(hi, 0.0)
    bw = np.maximum(-lo, 0.0)
    return CapacityLayout(flow_stats.pairs, fw, bw, f"C(c={c:g})")
