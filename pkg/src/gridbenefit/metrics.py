"""Balancing energy, benefit of transmission, layout sweeps and country reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dispatch import (
    DispatchResult,
    dispatch_series,
    mismatch_matrix,
    unconstrained_balancing,
    zero_balancing,
)
from .grid import (
    CapacityLayout,
    FlowQuantileTable,
    Topology,
    infinite_layout,
    interpolate_a,
    interpolate_b,
    interpolate_c,
    total_capacity,
)
from .series import HOURS_PER_YEAR, MismatchSeries, quantiles

REPORT_QUANTILES = (0.01, 0.10, 0.90, 0.99)


class UndefinedBenefit(ValueError):
    """Zero and unlimited transmission give the same balancing energy."""


def balancing_energy(result: DispatchResult) -> float:
    """Annual balancing energy in TWh."""
    return HOURS_PER_YEAR * float(result.B.mean(axis=0).sum()) / 1000.0


def curtailment_energy(result: DispatchResult) -> float:
    return HOURS_PER_YEAR * float(result.C.mean(axis=0).sum()) / 1000.0


def benefit(E_B_zero: float, E_B_layout: float, E_B_unconstrained: float) -> float:
    """Fraction of the largest possible balancing reduction a layout achieves."""
    span = E_B_zero - E_B_unconstrained
    if span < 0:
        raise ValueError("unconstrained balancing energy exceeds the zero-transmission value")
    if span == 0:
        raise UndefinedBenefit("benefit undefined: E_B(0) equals E_B(inf)")
    return (E_B_zero - E_B_layout) / span


@dataclass(frozen=True)
class BenefitReport:
    layout: str
    total_capacity: float
    E_B_zero: float
    E_B_layout: float
    E_B_unconstrained: float
    beta: float
    E_B_pct: float = float("nan")


def benefit_report(result: DispatchResult, deltas: np.ndarray, annual_consumption_twh: float | None = None) -> BenefitReport:
    e0 = zero_balancing(deltas)
    einf = unconstrained_balancing(deltas)
    el = balancing_energy(result)
    if result.layout.is_unconstrained():
        # unlimited links reach the aggregate optimum by construction
        beta = 1.0
    elif np.all(result.layout.forward == 0) and np.all(result.layout.backward == 0):
        beta = 0.0
    else:
        try:
            beta = benefit(e0, el, einf)
        except UndefinedBenefit:
            beta = float("nan")
    try:
        cap = total_capacity(result.layout)
    except ValueError:
        cap = float("inf")
    pct = 100.0 * el / annual_consumption_twh if annual_consumption_twh else float("nan")
    return BenefitReport(result.layout.name, cap, e0, el, einf, beta, pct)


def annual_consumption(mean_loads) -> float:
    """TWh per year for the given mean loads in GW."""
    return HOURS_PER_YEAR * float(np.sum(mean_loads)) / 1000.0


# --------------------------------------------------------------------------
# flow quantiles


def flow_quantile_table(result: DispatchResult) -> FlowQuantileTable:
    if not result.layout.is_unconstrained():
        raise ValueError("flow quantiles need a run with unlimited capacities")
    return FlowQuantileTable.from_flows(result.topology.pairs, result.F)


def flow_quantile_layout(flows: DispatchResult | FlowQuantileTable, c: float) -> CapacityLayout:
    table = flows if isinstance(flows, FlowQuantileTable) else flow_quantile_table(flows)
    return interpolate_c(table, c)


# --------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepPoint:
    param: float
    total_capacity: float
    E_B: float
    beta: float
    E_B_pct: float = float("nan")


@dataclass(frozen=True)
class SweepCurve:
    family: str
    points: tuple[SweepPoint, ...]

    def __post_init__(self):
        caps = [p.total_capacity for p in self.points]
        if any(b < a for a, b in zip(caps, caps[1:])):
            raise ValueError("sweep capacity axis must be non-decreasing")

    @property
    def capacities(self) -> np.ndarray:
        return np.array([p.total_capacity for p in self.points])

    @property
    def energies(self) -> np.ndarray:
        return np.array([p.E_B for p in self.points])

    @property
    def betas(self) -> np.ndarray:
        return np.array([p.beta for p in self.points])


@dataclass
class SweepInputs:
    deltas: np.ndarray
    topology: Topology
    present: CapacityLayout | None = None
    q99: CapacityLayout | None = None
    flow_table: FlowQuantileTable | None = None
    eps: float | None = None
    threads: int = 1
    annual_consumption_twh: float | None = None
    notes: list[str] = field(default_factory=list)

    def ensure_flow_table(self) -> FlowQuantileTable:
        if self.flow_table is None:
            run = dispatch_series(self.deltas, self.topology, infinite_layout(self.topology), self.eps, self.threads)
            self.flow_table = flow_quantile_table(run)
            self.notes.append("family C: unconstrained run computed automatically")
        return self.flow_table


class SweepError(RuntimeError):
    def __init__(self, family: str, param: float, cause: Exception):
        super().__init__(f"sweep {family} failed at parameter {param:g}: {cause}")
        self.family = family
        self.param = param


def sweep_layout(family: str, param: float, base: SweepInputs) -> CapacityLayout:
    family = family.upper()
    if family == "A":
        if base.present is None or base.q99 is None:
            raise ValueError("family A needs the present and 99% quantile layouts")
        return interpolate_a(base.present.aligned_to(base.topology), base.q99.aligned_to(base.topology), param)
    if family == "B":
        if base.q99 is None:
            raise ValueError("family B needs the 99% quantile layout")
        return interpolate_b(base.q99.aligned_to(base.topology), param)
    if family == "C":
        return interpolate_c(base.ensure_flow_table(), param)
    raise ValueError(f"unknown interpolation family {family!r}")


def sweep(family: str, params: Sequence[float], base: SweepInputs) -> SweepCurve:
    params = [float(p) for p in params]
    if any(b < a for a, b in zip(params, params[1:])):
        raise ValueError("sweep parameters must be increasing")
    e0 = zero_balancing(base.deltas)
    einf = unconstrained_balancing(base.deltas)
    points = []
    for p in params:
        try:
            layout = sweep_layout(family, p, base)
            run = dispatch_series(base.deltas, base.topology, layout, base.eps, base.threads)
        except Exception as exc:
            raise SweepError(family, p, exc) from exc
        eb = balancing_energy(run)
        try:
            beta = benefit(e0, eb, einf)
        except UndefinedBenefit:
            beta = float("nan")
        pct = 100.0 * eb / base.annual_consumption_twh if base.annual_consumption_twh else float("nan")
        points.append(SweepPoint(p, total_capacity(layout), eb, beta, pct))
    return SweepCurve(family.upper(), tuple(points))


# --------------------------------------------------------------------------
# country perspective


@dataclass(frozen=True)
class CountryRow:
    iso: str
    residual_mean: float  # units of mean load
    excess_mean: float  # units of mean load
    q01: float
    q10: float
    q90: float
    q99: float
    import_share: float


@dataclass(frozen=True)
class CountryReport:
    layout: str
    rows: tuple[CountryRow, ...]
    eu: CountryRow

    def row(self, iso: str) -> CountryRow:
        for r in self.rows:
            if r.iso == iso:
                return r
        raise KeyError(iso)


def _share(bal: float, zero: float) -> float:
    return 1.0 - bal / zero if zero > 0 else 0.0


def country_report(result: DispatchResult, ms: Sequence[MismatchSeries] | np.ndarray, loads) -> CountryReport:
    """Per-country residual / excess after transmission, in units of mean load.

    ``loads`` are the countries' mean loads in topology order.
    """
    deltas = ms if isinstance(ms, np.ndarray) else mismatch_matrix(ms, result.topology)
    loads = np.asarray(loads, dtype=float)
    topo = result.topology
    if deltas.shape != result.B.shape or loads.size != topo.n_nodes:
        raise ValueError("report inputs do not match the dispatch result")
    post = result.post_mismatch(deltas)
    zero = np.maximum(-deltas, 0.0).mean(axis=0)
    bal = result.B.mean(axis=0)
    cur = result.C.mean(axis=0)
    qs = quantiles(post / loads, REPORT_QUANTILES)
    rows = []
    for i, iso in enumerate(topo.node_ids):
        rows.append(
            CountryRow(iso, bal[i] / loads[i], cur[i] / loads[i], *(float(v) for v in qs[:, i]), _share(bal[i], zero[i]))
        )
    total = loads.sum()
    eu_q = quantiles(post.sum(axis=1) / total, REPORT_QUANTILES)
    eu = CountryRow("EU", bal.sum() / total, cur.sum() / total, *(float(v) for v in eu_q), _share(bal.sum(), zero.sum()))
    return CountryReport(result.layout.name, tuple(rows), eu)


@dataclass(frozen=True)
class Histogram:
    bin_width: float
    lefts: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def mismatch_histogram(
    series,
    bin_width: float,
    normalize_by: float | None = None,
    exclude_zero: bool = True,
    zero_tol: float = 0.0,
) -> Histogram:
    """Counts in bins ``[k * w, (k + 1) * w)``; only occupied bins are listed."""
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    x = np.asarray(series, dtype=float).reshape(-1)
    if exclude_zero:
        x = x[np.abs(x) > zero_tol]
    if normalize_by is not None:
        x = x / normalize_by
    k = np.floor(x / bin_width).astype(np.int64)
    idx, counts = np.unique(k, return_counts=True)
    return Histogram(bin_width, idx * bin_width, counts)
