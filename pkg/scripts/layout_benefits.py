"""Balancing energy and transmission benefit of the shipped layouts on synthetic data.

Runs the zero, present, intermediate, 99 % quantile and unconstrained
layouts over the 27-country network and prints one row per layout.

    python scripts/layout_benefits.py --seed 1 --hours 8760 --threads 4
"""

from __future__ import annotations

import argparse
import time

from gridbenefit.cli import RunConfig, load_inputs, resolve_layout
from gridbenefit.dispatch import dispatch_series
from gridbenefit.metrics import annual_consumption, benefit_report

LAYOUTS = ["zero", "present", "intermediate", "q99", "infinite"]


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--hours", type=int, default=8760)
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args(argv)

    inp = load_inputs(RunConfig(command="dispatch", synth_seed=args.seed, hours=args.hours))
    consumption = annual_consumption(inp.loads)
    print(f"{'layout':<14}{'capacity GW':>12}{'E_B TWh':>10}{'E_B %':>8}{'beta %':>8}{'time s':>8}")
    for spec in LAYOUTS:
        t0 = time.perf_counter()
        res = dispatch_series(inp.deltas, inp.topo, resolve_layout(spec, inp.topo), threads=args.threads)
        rep = benefit_report(res, inp.deltas, consumption)
        dt = time.perf_counter() - t0
        print(f"{spec:<14}{rep.total_capacity:>12.1f}{rep.E_B_layout:>10.1f}{rep.E_B_pct:>8.1f}{100 * rep.beta:>8.1f}{dt:>8.1f}")


if __name__ == "__main__":
    main()
