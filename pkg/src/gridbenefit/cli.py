"""Command-line entry point.

Every command writes its tables to ``--out`` together with ``manifest.json``,
which echoes the full configuration and the SHA-256 digests of all inputs.
Passing a manifest back through ``--config`` reruns the command after
checking that none of the inputs changed.

Exit codes: 0 success, 2 bad input, 3 solver failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import io as gio
from .dispatch import (
    DispatchResult,
    SolverError,
    available_threads,
    dispatch_series,
    mismatch_matrix,
)
from .grid import CapacityLayout, FlowQuantileTable, Topology, infinite_layout, total_capacity, zero_layout
from .metrics import (
    SweepError,
    SweepInputs,
    annual_consumption,
    benefit_report,
    country_report,
    flow_quantile_layout,
    flow_quantile_table,
    mismatch_histogram,
    sweep,
)
from .series import CountrySeries, aggregate, mismatch, optimal_mix, synth_generate

log = logging.getLogger("gridbenefit")

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 2, 3
HIST_BIN_WIDTH = 0.05  # in units of mean load
ZERO_MISMATCH_GW = 1e-9


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str = ""
    topology: str | None = None
    mean_loads: str | None = None
    series: str | None = None
    synth_seed: int | None = None
    hours: int = 8760
    gamma: float = 1.0
    alpha: str = "optimal"
    eps: float | None = None
    threads: int | None = None
    out: str = "out"
    layouts: list[str] = field(default_factory=list)
    results: list[str] = field(default_factory=list)
    family: str | None = None
    params: list[float] = field(default_factory=list)
    c: float = 99.0
    flows: str | None = None
    present: str = "present"
    q99: str = "q99"
    bin_width: float = HIST_BIN_WIDTH

    def validate(self):
        if (self.series is None) == (self.synth_seed is None):
            raise InputError("give exactly one series source: --series FILE or --synth-seed N")
        for p in (self.topology, self.mean_loads, self.series, self.flows, *self.results):
            if p is not None and not Path(p).exists():
                raise InputError(f"input not found: {p}")
        if self.alpha != "optimal":
            try:
                a = float(self.alpha)
            except ValueError:
                raise InputError("--alpha must be 'optimal' or a number in [0, 1]") from None
            if not 0 <= a <= 1:
                raise InputError("--alpha must lie in [0, 1]")


# --------------------------------------------------------------------------
# input assembly


@dataclass
class Inputs:
    topo: Topology
    series: list[CountrySeries]
    alphas: np.ndarray
    deltas: np.ndarray
    paths: dict[str, str]
    notes: list[str] = field(default_factory=list)

    @property
    def loads(self) -> np.ndarray:
        return np.array([cs.mean_load for cs in self.series])


def _topology(cfg: RunConfig, paths: dict) -> Topology:
    loads_path = cfg.mean_loads
    if loads_path is None and cfg.topology is None:
        loads_path = str(gio.fixture_path("nodes/mean_loads.csv"))
    topo_path = cfg.topology or str(gio.fixture_path("topology/europe.csv"))
    paths["topology"] = topo_path
    loads = None
    if loads_path is not None:
        paths["mean_loads"] = loads_path
        loads = gio.read_mean_loads(loads_path)
    return gio.read_topology(topo_path, loads)


def _series(cfg: RunConfig, topo: Topology, paths: dict) -> list[CountrySeries]:
    if cfg.series is not None:
        paths["series"] = cfg.series
        series = gio.read_series(cfg.series)
    else:
        series = synth_generate(gio.default_synth_config(cfg.synth_seed, topo), cfg.hours)
    by_node = {cs.node: cs for cs in series}
    if sorted(by_node) != sorted(topo.node_ids):
        extra = sorted(set(by_node) ^ set(topo.node_ids))
        raise InputError(f"series and topology disagree on nodes: {', '.join(extra)}")
    return [by_node[n] for n in topo.node_ids]


def load_inputs(cfg: RunConfig) -> Inputs:
    cfg.validate()
    paths: dict[str, str] = {}
    topo = _topology(cfg, paths)
    series = _series(cfg, topo, paths)
    if cfg.alpha == "optimal":
        alphas = np.array([optimal_mix(cs, cfg.gamma).alpha_star for cs in series])
    else:
        alphas = np.full(len(series), float(cfg.alpha))
    ms = [mismatch(cs, cfg.gamma, a) for cs, a in zip(series, alphas)]
    return Inputs(topo, series, alphas, mismatch_matrix(ms, topo), paths)


def resolve_layout(spec: str, topo: Topology, paths: dict | None = None) -> CapacityLayout:
    if spec == "zero":
        return zero_layout(topo)
    if spec in ("infinite", "inf"):
        return infinite_layout(topo)
    if spec in gio.LAYOUT_NAMES:
        path = gio.fixture_path(f"layouts/{spec}.csv")
        name = spec
    else:
        path = Path(spec)
        if not path.exists():
            raise InputError(f"layout not found: {spec}")
        name = path.stem
    if paths is not None:
        paths[f"layout:{spec}"] = str(path)
    return gio.read_layout(path, name).aligned_to(topo)


# --------------------------------------------------------------------------
# commands


def _threads(cfg: RunConfig) -> int:
    return cfg.threads or available_threads()


def _dispatch_tables(out: Path, res: DispatchResult):
    topo = res.topology
    T = res.hours
    gio.write_rows(out / "flows.csv", ["hour"] + [f"F_{a}_{b}" for a, b in topo.pairs], ([t, *map(float, res.F[t])] for t in range(T)))
    gio.write_rows(
        out / "balancing.csv",
        ["hour"] + [f"B_{i}" for i in topo.node_ids] + ["B_min"],
        ([t, *map(float, res.B[t]), float(res.B_min[t])] for t in range(T)),
    )
    gio.write_rows(out / "curtailment.csv", ["hour"] + [f"C_{i}" for i in topo.node_ids], ([t, *map(float, res.C[t])] for t in range(T)))
    gio.write_layout(res.layout, out / "layout.csv")


BENEFIT_HEADER = ["layout", "total_capacity_gw", "E_B_zero_twh", "E_B_twh", "E_B_unconstrained_twh", "E_B_pct", "beta"]


def cmd_mix(cfg: RunConfig, inp: Inputs, out: Path) -> dict:
    rows = []
    for cs in inp.series:
        r = optimal_mix(cs, cfg.gamma)
        rows.append([cs.node, r.alpha_star, r.residual_mean / cs.mean_load, r.band_low, r.band_high])
    eu = aggregate(inp.series)
    r = optimal_mix(eu, cfg.gamma)
    rows.append(["EU", r.alpha_star, r.residual_mean / eu.mean_load, r.band_low, r.band_high])
    header = ["iso", "alpha_star", "residual_mean_norm", "band_low", "band_high"]
    gio.write_rows(out / "mix.csv", header, rows)
    gio.write_json(out / "mix.json", [dict(zip(header, [row[0]] + [float(gio.fmt(v)) for v in row[1:]])) for row in rows])
    return {"eu_alpha_star": r.alpha_star}


def cmd_dispatch(cfg: RunConfig, inp: Inputs, out: Path) -> dict:
    spec = cfg.layouts[0] if cfg.layouts else "present"
    layout = resolve_layout(spec, inp.topo, inp.paths)
    res = dispatch_series(inp.deltas, inp.topo, layout, cfg.eps, _threads(cfg))
    _dispatch_tables(out, res)
    rep = benefit_report(res, inp.deltas, annual_consumption(inp.loads))
    row = [rep.layout, rep.total_capacity, rep.E_B_zero, rep.E_B_layout, rep.E_B_unconstrained, rep.E_B_pct, rep.beta]
    gio.write_rows(out / "benefit.csv", BENEFIT_HEADER, [row])
    gio.write_json(out / "benefit.json", dict(zip(BENEFIT_HEADER, [row[0]] + [float(gio.fmt(v)) for v in row[1:]])))
    return {"E_B_twh": rep.E_B_layout, "beta": rep.beta, "layout": rep.layout}


def _flow_table(cfg: RunConfig, inp: Inputs, out: Path) -> FlowQuantileTable:
    if cfg.flows:
        inp.paths["flows"] = cfg.flows
        return FlowQuantileTable.from_flows(inp.topo.pairs, gio.read_flows(cfg.flows, inp.topo))
    inp.notes.append("no --flows given: unconstrained run computed automatically")
    run = dispatch_series(inp.deltas, inp.topo, infinite_layout(inp.topo), cfg.eps, _threads(cfg))
    return flow_quantile_table(run)


def cmd_sweep(cfg: RunConfig, inp: Inputs, out: Path) -> dict:
    family = (cfg.family or "").upper()
    if family not in ("A", "B", "C"):
        raise InputError("--family must be A, B or C")
    if not cfg.params:
        raise InputError("--params is required")
    base = SweepInputs(
        inp.deltas,
        inp.topo,
        present=resolve_layout(cfg.present, inp.topo, inp.paths) if family == "A" else None,
        q99=resolve_layout(cfg.q99, inp.topo, inp.paths) if family in ("A", "B") else None,
        eps=cfg.eps,
        threads=_threads(cfg),
        annual_consumption_twh=annual_consumption(inp.loads),
    )
    if family == "C":
        base.flow_table = _flow_table(cfg, inp, out)
    curve = sweep(family, cfg.params, base)
    inp.notes.extend(base.notes)
    header = ["param", "total_capacity_gw", "E_B_twh", "E_B_pct", "beta"]
    rows = [[p.param, p.total_capacity, p.E_B, p.E_B_pct, p.beta] for p in curve.points]
    gio.write_rows(out / f"sweep_{family}.csv", header, rows)
    gio.write_json(out / f"sweep_{family}.json", [dict(zip(header, [float(gio.fmt(v)) for v in r])) for r in rows])
    return {"family": family, "points": len(rows)}


def cmd_quantile_layout(cfg: RunConfig, inp: Inputs, out: Path) -> dict:
    if not 50 <= cfg.c <= 100:
        raise InputError("--c must lie in [50, 100]")
    table = _flow_table(cfg, inp, out)
    layout = flow_quantile_layout(table, cfg.c)
    layout = CapacityLayout(layout.pairs, gio.quantize(layout.forward), gio.quantize(layout.backward), layout.name)
    gio.write_layout(layout, out / f"layout_c{gio.fmt(cfg.c)}.csv")
    full = total_capacity(flow_quantile_layout(table, 100.0))
    tc = total_capacity(layout)
    return {"total_capacity_gw": tc, "total_capacity_c100_gw": full, "ratio_to_c100": tc / full if full else float("nan")}


def _result_from_dir(path: str, inp: Inputs) -> DispatchResult:
    d = Path(path)
    F = gio.read_flows(d / "flows.csv", inp.topo)
    if F.shape[0] != inp.deltas.shape[0]:
        raise InputError(f"{path}: result covers {F.shape[0]} hours, series has {inp.deltas.shape[0]}")
    layout = gio.read_layout(d / "layout.csv", d.name).aligned_to(inp.topo)
    inp.paths[f"result:{path}"] = str(d / "flows.csv")
    r = inp.deltas - F @ inp.topo.K.T
    B, C = np.maximum(-r, 0.0), np.maximum(r, 0.0)
    return DispatchResult(inp.topo, layout, F, B, C, B.sum(axis=1), np.full(F.shape[0], np.nan))


def cmd_report(cfg: RunConfig, inp: Inputs, out: Path) -> dict:
    results = [_result_from_dir(p, inp) for p in cfg.results]
    for spec in cfg.layouts:
        layout = resolve_layout(spec, inp.topo, inp.paths)
        results.append(dispatch_series(inp.deltas, inp.topo, layout, cfg.eps, _threads(cfg)))
    if not results:
        raise InputError("report needs at least one --layout or --result")
    loads = inp.loads
    header = ["layout", "iso", "residual_mean_norm", "excess_mean_norm", "q01", "q10", "q90", "q99", "import_share"]
    rows = []
    for res in results:
        rep = country_report(res, inp.deltas, loads)
        for r in (*rep.rows, rep.eu):
            rows.append([rep.layout, *dataclasses.astuple(r)])
        post = res.post_mismatch(inp.deltas)
        hist_rows = []
        for i, iso in enumerate(inp.topo.node_ids):
            h = mismatch_histogram(post[:, i], cfg.bin_width, normalize_by=loads[i], zero_tol=ZERO_MISMATCH_GW)
            hist_rows += [[iso, float(a), float(a + h.bin_width), int(n)] for a, n in zip(h.lefts, h.counts)]
        h = mismatch_histogram(post.sum(axis=1), cfg.bin_width, normalize_by=loads.sum(), zero_tol=ZERO_MISMATCH_GW)
        hist_rows += [["EU", float(a), float(a + h.bin_width), int(n)] for a, n in zip(h.lefts, h.counts)]
        gio.write_rows(out / f"hist_{rep.layout}.csv", ["iso", "bin_left", "bin_right", "count"], hist_rows)
    gio.write_rows(out / "country_report.csv", header, rows)
    gio.write_json(
        out / "country_report.json",
        [dict(zip(header, r[:2] + [float(gio.fmt(v)) for v in r[2:]])) for r in rows],
    )
    return {"layouts": [r.layout.name for r in results]}


def cmd_synth(cfg: RunConfig, inp: Inputs, out: Path) -> dict:
    gio.write_series(inp.series, out / "series.csv")
    return {"hours": len(inp.series[0]), "nodes": len(inp.series)}


COMMANDS = {
    "mix": cmd_mix,
    "dispatch": cmd_dispatch,
    "sweep": cmd_sweep,
    "quantile-layout": cmd_quantile_layout,
    "report": cmd_report,
    "synth": cmd_synth,
}


# --------------------------------------------------------------------------
# argument handling


def _params(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated numbers") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridbenefit", description="Balancing energy versus transmission capacity.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="RunConfig JSON or a manifest.json to replay")
    common.add_argument("--topology", help="topology CSV (default: shipped 27-country network)")
    common.add_argument("--mean-loads", dest="mean_loads", help="mean-load CSV (iso,mean_load_gw)")
    src = common.add_mutually_exclusive_group()
    src.add_argument("--series", help="series CSV (hour,L_<ISO>,W_<ISO>,S_<ISO>,...)")
    src.add_argument("--synth-seed", dest="synth_seed", type=int, help="use synthetic data with this seed")
    common.add_argument("--hours", type=int, help="hours of synthetic data (default 8760)")
    common.add_argument("--gamma", type=float, help="renewable penetration (default 1)")
    common.add_argument("--alpha", help="'optimal' (per country) or a fixed wind share")
    common.add_argument("--eps", type=float, help="step-2 relaxation of B_min in GW (default: relative)")
    common.add_argument("--threads", type=int, help="worker processes (default: all cores)")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    sub.add_parser("mix", parents=[common], help="optimal wind/solar mix per country")
    d = sub.add_parser("dispatch", parents=[common], help="hourly dispatch under one layout")
    d.add_argument("--layout", dest="layouts", action="append", help="shipped name, zero, infinite, or CSV path")
    s = sub.add_parser("sweep", parents=[common], help="balancing energy along an interpolation family")
    s.add_argument("--family", choices=["A", "B", "C", "a", "b", "c"])
    s.add_argument("--params", type=_params)
    s.add_argument("--present", help="present layout for family A")
    s.add_argument("--q99", help="99%% quantile layout for families A and B")
    s.add_argument("--flows", help="flows.csv of an unconstrained run (family C)")
    q = sub.add_parser("quantile-layout", parents=[common], help="directed caps from unconstrained flow quantiles")
    q.add_argument("--c", type=float)
    q.add_argument("--flows", help="flows.csv of an unconstrained run")
    r = sub.add_parser("report", parents=[common], help="per-country residual/excess and histograms")
    r.add_argument("--layout", dest="layouts", action="append")
    r.add_argument("--result", dest="results", action="append", help="output directory of a previous dispatch")
    r.add_argument("--bin-width", dest="bin_width", type=float)
    sub.add_parser("synth", parents=[common], help="write a synthetic series CSV")
    return p


def _verify_manifest(doc: dict):
    for key, entry in doc.get("inputs", {}).items():
        path, digest = entry["path"], entry["sha256"]
        if not Path(path).exists():
            raise InputError(f"manifest input {key} missing: {path}")
        if gio.sha256(path) != digest:
            raise InputError(f"manifest input {key} changed since the recorded run: {path}")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        if "config" in doc:
            _verify_manifest(doc)
            doc = doc["config"]
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = set(doc) - known
        if unknown:
            raise InputError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg = RunConfig(**doc)
    for f in dataclasses.fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            setattr(cfg, f.name, val)
    if args.series is not None:
        cfg.synth_seed = None
    elif args.synth_seed is not None:
        cfg.series = None
    cfg.command = args.command
    return cfg


def run(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    inp = load_inputs(cfg)
    summary = COMMANDS[cfg.command](cfg, inp, out)
    manifest = {
        "artifact_version": __version__,
        "command": cfg.command,
        "config": dataclasses.asdict(cfg),
        "inputs": {k: {"path": str(Path(v).resolve()), "sha256": gio.sha256(v)} for k, v in sorted(inp.paths.items())},
        "timing_s": round(time.perf_counter() - t0, 3),
        "summary": summary,
        "notes": inp.notes,
        "synthetic_data": cfg.synth_seed is not None,
    }
    gio.write_json(out / "manifest.json", manifest)
    return manifest


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        manifest = run(cfg)
    except (SolverError, SweepError) as exc:
        if isinstance(exc, SweepError) and not isinstance(exc.__cause__, SolverError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (InputError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    log.info("wrote %s", Path(cfg.out) / "manifest.json")
    print(json.dumps(manifest["summary"], sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
