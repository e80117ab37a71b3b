"""CSV formats, number formatting and shipped fixtures.

Numbers are written with 6 significant digits. Python's ``format`` rounds
the exact binary value half-to-even, so output is identical on every
platform, and ``quantize`` returns exactly the value a reader will see.
"""

from __future__ import annotations

import csv
import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import CapacityLayout, LayoutError, Link, Node, Topology, build_topology
from .series import CountrySeries, SynthConfig

SIG_DIGITS = 6
LAYOUT_NAMES = ("present", "intermediate", "q99", "unconstrained")


def fmt(x: float) -> str:
    x = float(x)
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = f"{x:.{SIG_DIGITS}g}"
    return "0" if s == "-0" else s


def quantize(x):
    """Round to what a write/read cycle through ``fmt`` produces."""
    if np.isscalar(x):
        return float(fmt(x))
    arr = np.asarray(x, dtype=float)
    return np.array([float(fmt(v)) for v in arr.ravel()]).reshape(arr.shape)


def parse_number(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity", "nrl"):
        return float("inf")
    return float(t)


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _reader(path, required: Sequence[str]):
    fh = open(path, newline="", encoding="utf-8")
    rd = csv.DictReader(fh)
    missing = [c for c in required if c not in (rd.fieldnames or [])]
    if missing:
        fh.close()
        raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
    return fh, rd


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write a CSV with LF endings; floats go through ``fmt``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


# --------------------------------------------------------------------------
# fixtures


def fixture_path(rel: str) -> Path:
    return Path(str(resources.files("gridbenefit") / "data" / rel))


def read_mean_loads(path=None) -> dict[str, float]:
    path = path or fixture_path("nodes/mean_loads.csv")
    fh, rd = _reader(path, ["iso", "mean_load_gw"])
    with fh:
        return {r["iso"].strip(): float(r["mean_load_gw"]) for r in rd}


def read_topology(path=None, mean_loads: dict[str, float] | None = None) -> Topology:
    """Links from a topology CSV; nodes from ``mean_loads`` (in its order) when given."""
    path = path or fixture_path("topology/europe.csv")
    fh, rd = _reader(path, ["link_id", "from_iso", "to_iso"])
    with fh:
        links = [Link(int(r["link_id"]), r["from_iso"].strip(), r["to_iso"].strip()) for r in rd]
    if mean_loads is None:
        order: list[str] = []
        for link in links:
            for end in (link.src, link.dst):
                if end not in order:
                    order.append(end)
        nodes = [Node(i) for i in order]
    else:
        nodes = [Node(i, v) for i, v in mean_loads.items()]
    return build_topology(nodes, links)


def european_topology() -> Topology:
    return read_topology(None, read_mean_loads())


def read_layout(path, name: str | None = None) -> CapacityLayout:
    fh, rd = _reader(path, ["from_iso", "to_iso", "cap_forward_gw", "cap_backward_gw"])
    with fh:
        rows = list(rd)
    pairs = [(r["from_iso"].strip(), r["to_iso"].strip()) for r in rows]
    fw = [parse_number(r["cap_forward_gw"]) for r in rows]
    bw = [parse_number(r["cap_backward_gw"]) for r in rows]
    return CapacityLayout(pairs, fw, bw, name if name is not None else Path(path).stem)


def write_layout(layout: CapacityLayout, path) -> None:
    write_rows(
        path,
        ["from_iso", "to_iso", "cap_forward_gw", "cap_backward_gw"],
        ((a, b, float(f), float(r)) for (a, b), f, r in zip(layout.pairs, layout.forward, layout.backward)),
    )


def shipped_layout(name: str) -> CapacityLayout:
    if name not in LAYOUT_NAMES:
        raise LayoutError(f"unknown shipped layout {name!r}; choose from {', '.join(LAYOUT_NAMES)}")
    return read_layout(fixture_path(f"layouts/{name}.csv"), name)


def read_series(path) -> list[CountrySeries]:
    """Series CSV with columns ``hour, L_<ISO>, W_<ISO>, S_<ISO>, ...``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        data = np.array([[float(v) for v in row] for row in rd if row], dtype=float)
    if not header or header[0] != "hour":
        raise ValueError(f"{path}: first column must be 'hour'")
    cols = {name: i for i, name in enumerate(header)}
    isos: list[str] = []
    for name in header[1:]:
        kind, _, iso = name.partition("_")
        if kind not in ("L", "W", "S") or not iso:
            raise ValueError(f"{path}: unexpected column {name!r}")
        if iso not in isos:
            isos.append(iso)
    if data.size == 0:
        raise ValueError(f"{path}: no data rows")
    out = []
    for iso in isos:
        missing = [f"{k}_{iso}" for k in "LWS" if f"{k}_{iso}" not in cols]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        out.append(CountrySeries(iso, data[:, cols[f"L_{iso}"]], data[:, cols[f"W_{iso}"]], data[:, cols[f"S_{iso}"]]))
    return out


def write_series(series: Sequence[CountrySeries], path) -> None:
    header = ["hour"]
    cols = []
    for cs in series:
        header += [f"L_{cs.node}", f"W_{cs.node}", f"S_{cs.node}"]
        cols += [cs.load, cs.wind_raw, cs.solar_raw]
    mat = np.column_stack(cols)
    write_rows(path, header, ([t, *map(float, mat[t])] for t in range(mat.shape[0])))


def quantize_series(series: Sequence[CountrySeries]) -> list[CountrySeries]:
    return [CountrySeries(cs.node, quantize(cs.load), quantize(cs.wind_raw), quantize(cs.solar_raw)) for cs in series]


def default_synth_config(seed: int | None = None, topo: Topology | None = None) -> SynthConfig:
    """The shipped 27-country synthetic setup (a stand-in for real weather data)."""
    with open(fixture_path("synth/default.json"), encoding="utf-8") as fh:
        params = json.load(fh)
    topo = topo or european_topology()
    if seed is not None:
        params["seed"] = int(seed)
    return SynthConfig(
        nodes=topo.node_ids,
        mean_loads=tuple(topo.mean_loads()),
        neighbours=topo.pairs,
        **params,
    )


def read_flows(path, topo: Topology) -> np.ndarray:
    """Flow CSV written by ``dispatch``: ``hour, F_<from>_<to>, ...``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        data = np.array([[float(v) for v in row] for row in rd if row], dtype=float)
    expected = ["hour"] + [f"F_{a}_{b}" for a, b in topo.pairs]
    if header != expected:
        raise ValueError(f"{path}: flow columns do not match the topology")
    return data[:, 1:]
