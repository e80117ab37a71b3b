from __future__ import annotations

import time

import numpy as np
import pytest

from gridbenefit import io as gio
from gridbenefit.cli import RunConfig, load_inputs
from gridbenefit.dispatch import dispatch_series
from gridbenefit.grid import Link, Node, build_topology, infinite_layout, line_topology, zero_layout

YEAR = 8760
timings: dict[str, float] = {}


@pytest.fixture(scope="session")
def europe():
    return gio.european_topology()


@pytest.fixture(scope="session")
def synth_year():
    """Inputs exactly as the CLI builds them for ``--synth-seed 1`` (one year)."""
    return load_inputs(RunConfig(command="dispatch", synth_seed=1, hours=YEAR))


@pytest.fixture(scope="session")
def year_unconstrained(synth_year):
    """Full-year dispatch with unlimited links, with its wall time attached."""
    t0 = time.perf_counter()
    res = dispatch_series(synth_year.deltas, synth_year.topo, infinite_layout(synth_year.topo), threads=1)
    timings["year_unconstrained"] = time.perf_counter() - t0
    return res


@pytest.fixture(scope="session")
def year_zero(synth_year):
    t0 = time.perf_counter()
    res = dispatch_series(synth_year.deltas, synth_year.topo, zero_layout(synth_year.topo), threads=1)
    timings["year_zero"] = time.perf_counter() - t0
    return res


@pytest.fixture(scope="session")
def synth_short():
    return load_inputs(RunConfig(command="dispatch", synth_seed=7, hours=240))


@pytest.fixture
def two_nodes():
    return line_topology(["A", "B"])


@pytest.fixture
def three_line():
    return line_topology(["A", "B", "C"])


@pytest.fixture
def triangle():
    nodes = [Node(n) for n in "ABC"]
    links = [Link(0, "A", "B"), Link(1, "B", "C"), Link(2, "A", "C")]
    return build_topology(nodes, links)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
