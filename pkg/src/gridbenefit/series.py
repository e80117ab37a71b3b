"""Hourly load / generation series, mismatch and mix optimisation.

All powers are GW on a one-hour step, so a mean in GW times 8760 is an
annual energy in GWh.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

HOURS_PER_YEAR = 8760
MIX_BAND_TOLERANCE = 0.01  # relative excess over the optimum that still counts as "near-optimal"


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float).reshape(-1)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CountrySeries:
    node: str
    load: np.ndarray
    wind_raw: np.ndarray
    solar_raw: np.ndarray

    def __post_init__(self):
        for name in ("load", "wind_raw", "solar_raw"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        T = self.load.size
        if T == 0 or self.wind_raw.size != T or self.solar_raw.size != T:
            raise ValueError(f"{self.node}: load, wind and solar must have the same non-zero length")
        if not np.all(np.isfinite(self.load)) or np.any(self.load <= 0):
            raise ValueError(f"{self.node}: load must be positive at every hour")
        for name in ("wind_raw", "solar_raw"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValueError(f"{self.node}: {name} must be finite and non-negative")
            if not arr.mean() > 0:
                raise ValueError(f"{self.node}: {name} has zero mean")

    def __len__(self):
        return self.load.size

    @property
    def mean_load(self) -> float:
        return float(self.load.mean())


@dataclass(frozen=True)
class MismatchSeries:
    node: str
    delta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "delta", _readonly(self.delta))

    def __len__(self):
        return self.delta.size


@dataclass(frozen=True)
class MixResult:
    alpha_star: float
    residual_mean: float
    band_low: float
    band_high: float


def mismatch(cs: CountrySeries, gamma: float = 1.0, alpha_w: float = 0.7) -> MismatchSeries:
    """Renewable generation scaled to ``gamma`` times the mean load, minus load."""
    if not 0.0 <= alpha_w <= 1.0:
        raise ValueError("alpha_w must lie in [0, 1]")
    wind = cs.wind_raw / cs.wind_raw.mean()
    solar = cs.solar_raw / cs.solar_raw.mean()
    gen = gamma * (alpha_w * wind + (1.0 - alpha_w) * solar) * cs.load.mean()
    return MismatchSeries(cs.node, gen - cs.load)


def residual_excess(ms: MismatchSeries) -> tuple[np.ndarray, np.ndarray]:
    residual = np.maximum(-ms.delta, 0.0)
    excess = np.maximum(ms.delta, 0.0)
    return residual, excess


def mix_grid(step: float = 0.01) -> np.ndarray:
    n = round(1.0 / step)
    if n < 1 or abs(n * step - 1.0) > 1e-9:
        raise ValueError("grid_step must divide 1")
    return np.round(np.linspace(0.0, 1.0, n + 1), 12)


def mean_residual_by_mix(cs: CountrySeries, gamma: float, alphas: np.ndarray) -> np.ndarray:
    d1 = mismatch(cs, gamma, 1.0).delta
    d0 = mismatch(cs, gamma, 0.0).delta
    out = np.empty(alphas.size)
    for i, a in enumerate(alphas):
        out[i] = np.maximum(-(a * d1 + (1.0 - a) * d0), 0.0).mean()
    return out


def optimal_mix(cs: CountrySeries, gamma: float = 1.0, grid_step: float = 0.01) -> MixResult:
    """Wind share on a regular grid minimising the mean residual load.

    Ties go to the smaller share. The band spans every grid share whose mean
    residual load is within ``MIX_BAND_TOLERANCE`` (relative) of the optimum.
    """
    alphas = mix_grid(grid_step)
    res = mean_residual_by_mix(cs, gamma, alphas)
    k = int(np.argmin(res))
    best = res[k]
    near = np.flatnonzero(res <= best * (1.0 + MIX_BAND_TOLERANCE))
    return MixResult(float(alphas[k]), float(best), float(alphas[near[0]]), float(alphas[near[-1]]))


def aggregate(series: Sequence[CountrySeries], node: str = "EU") -> CountrySeries:
    """Load-weighted union of several countries as a single node.

    Each country's wind and solar shapes are normalised to its own mean and
    weighted by its mean load, so that a common mix applied to the aggregate
    equals that mix applied to every country and summed.
    """
    load = np.sum([cs.load for cs in series], axis=0)
    wind = np.sum([cs.mean_load * cs.wind_raw / cs.wind_raw.mean() for cs in series], axis=0)
    solar = np.sum([cs.mean_load * cs.solar_raw / cs.solar_raw.mean() for cs in series], axis=0)
    return CountrySeries(node, load, wind, solar)


def detrend(load, year_lengths: Sequence[int]) -> np.ndarray:
    """Rescale each year so its mean equals the mean of the final year."""
    load = np.asarray(load, dtype=float)
    lengths = [int(n) for n in year_lengths]
    if any(n <= 0 for n in lengths):
        raise ValueError("empty year bucket")
    if sum(lengths) != load.size:
        raise ValueError("year partition does not cover the series")
    edges = np.concatenate([[0], np.cumsum(lengths)])
    target = load[edges[-2] : edges[-1]].mean()
    out = load.copy()
    for a, b in zip(edges[:-1], edges[1:]):
        out[a:b] *= target / load[a:b].mean()
    return out


def quantiles(series, qs, presorted: bool = False) -> np.ndarray:
    """Empirical quantiles by linear interpolation between order statistics.

    Position ``q * (n - 1)`` in the sorted sample; the same convention as
    numpy's default ``"linear"`` method. Works along axis 0 for 2-D input.
    """
    s = np.asarray(series, dtype=float)
    if s.shape[0] == 0:
        raise ValueError("quantiles of an empty series")
    if not presorted:
        s = np.sort(s, axis=0)
    qs = np.asarray(qs, dtype=float)
    if np.any(qs < 0) or np.any(qs > 1):
        raise ValueError("quantile probabilities must lie in [0, 1]")
    n = s.shape[0]
    pos = qs * (n - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, n - 1)
    frac = pos - lo
    if s.ndim == 2:
        frac = frac[:, None]
    return s[lo] + frac * (s[hi] - s[lo])


# --------------------------------------------------------------------------
# synthetic stand-in data


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the synthetic load / wind / solar generator.

    The generator is a stand-in for real weather-driven data: sinusoidal
    seasonal and diurnal cycles, log-normal AR(1) noise, and a noise
    component shared between neighbouring nodes.
    """

    seed: int = 1
    nodes: tuple[str, ...] = ()
    mean_loads: tuple[float, ...] = ()
    neighbours: tuple[tuple[str, str], ...] = ()
    load_seasonal: float = 0.15
    load_diurnal: float = 0.15
    load_noise: float = 0.04
    wind_seasonal: float = 0.35
    wind_noise: float = 0.7
    solar_seasonal: float = 0.6
    solar_noise: float = 0.4
    persistence: float = 0.97
    regional_weight: float = 0.6
    sunrise: int = 6
    sunset: int = 20

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "mean_loads", tuple(float(v) for v in self.mean_loads))
        object.__setattr__(self, "neighbours", tuple(tuple(p) for p in self.neighbours))
        if len(self.nodes) != len(self.mean_loads) or not self.nodes:
            raise ValueError("need one mean load per node")
        if any(v <= 0 for v in self.mean_loads):
            raise ValueError("mean loads must be positive")
        amps = ("load_seasonal", "load_diurnal", "load_noise", "wind_seasonal", "wind_noise", "solar_seasonal", "solar_noise")
        for name in amps:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.load_seasonal + self.load_diurnal >= 1:
            raise ValueError("load_seasonal + load_diurnal must stay below 1 to keep load positive")
        if self.wind_seasonal >= 1:
            raise ValueError("wind_seasonal must be below 1")
        if self.solar_seasonal >= 1:
            raise ValueError("solar_seasonal must be below 1")
        if not 0 <= self.persistence < 1:
            raise ValueError("persistence must lie in [0, 1)")
        if not 0 <= self.regional_weight <= 1:
            raise ValueError("regional_weight must lie in [0, 1]")
        if not 0 <= self.sunrise < self.sunset <= 24:
            raise ValueError("need 0 <= sunrise < sunset <= 24")


def _ar1(rng: np.random.Generator, shape, phi: float) -> np.ndarray:
    """Unit-variance AR(1) paths along axis 0."""
    eps = rng.standard_normal(shape)
    out = np.empty(shape)
    out[0] = eps[0]
    c = np.sqrt(1.0 - phi * phi)
    for t in range(1, shape[0]):
        out[t] = phi * out[t - 1] + c * eps[t]
    return out


def _regional(own: np.ndarray, shared: np.ndarray, adjacency: np.ndarray, w: float) -> np.ndarray:
    # each node mixes in the shared noise of its closed neighbourhood,
    # renormalised to unit variance
    closed = adjacency + np.eye(adjacency.shape[0])
    mix = shared @ (closed / np.sqrt(closed.sum(axis=0)))
    return np.sqrt(1.0 - w) * own + np.sqrt(w) * mix


def synth_generate(cfg: SynthConfig, T: int) -> list[CountrySeries]:
    if T < 24:
        raise ValueError("need at least 24 hours")
    rng = np.random.default_rng(cfg.seed)
    N = len(cfg.nodes)
    pos = {n: i for i, n in enumerate(cfg.nodes)}
    adjacency = np.zeros((N, N))
    for a, b in cfg.neighbours:
        adjacency[pos[a], pos[b]] = adjacency[pos[b], pos[a]] = 1.0

    t = np.arange(T, dtype=float)
    hour = t % 24
    year_phase = 2 * np.pi * t / HOURS_PER_YEAR
    winter = np.cos(year_phase)  # +1 at hour 0 (mid-winter)
    # node-specific phase offsets keep countries from being exact copies
    offsets = np.linspace(-0.3, 0.3, N) if N > 1 else np.zeros(1)

    phi = cfg.persistence
    load_n = _ar1(rng, (T, N), phi)
    wind_n = _regional(_ar1(rng, (T, N), phi), _ar1(rng, (T, N), phi), adjacency, cfg.regional_weight)
    solar_n = _regional(_ar1(rng, (T, N), phi), _ar1(rng, (T, N), phi), adjacency, cfg.regional_weight)

    out = []
    for i, node in enumerate(cfg.nodes):
        diurnal = -np.cos(2 * np.pi * (hour - 3.0) / 24 + offsets[i])
        base = 1.0 + cfg.load_seasonal * winter + cfg.load_diurnal * diurnal
        ln = cfg.load_noise
        load = cfg.mean_loads[i] * base * np.exp(ln * load_n[:, i] - 0.5 * ln * ln)

        wn = cfg.wind_noise
        wind = (1.0 + cfg.wind_seasonal * np.cos(year_phase + offsets[i])) * np.exp(wn * wind_n[:, i] - 0.5 * wn * wn)

        day = (hour >= cfg.sunrise) & (hour < cfg.sunset)
        elev = np.where(day, np.sin(np.pi * (hour - cfg.sunrise + 0.5) / (cfg.sunset - cfg.sunrise)), 0.0)
        sn = cfg.solar_noise
        cloud = np.exp(sn * solar_n[:, i] - 0.5 * sn * sn)
        solar = elev * (1.0 - cfg.solar_seasonal * np.cos(year_phase + offsets[i])) * cloud

        out.append(CountrySeries(node, load, wind, solar))
    return out
