"""Per-hour solve time of the two-step dispatch on the European network.

    python scripts/benchmark.py --hours 500
"""

from __future__ import annotations

import argparse
import time

from gridbenefit.cli import RunConfig, load_inputs, resolve_layout
from gridbenefit.dispatch import dispatch_series


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--hours", type=int, default=500)
    p.add_argument("--layouts", nargs="+", default=["zero", "present", "q99", "infinite"])
    args = p.parse_args(argv)

    inp = load_inputs(RunConfig(command="dispatch", synth_seed=args.seed, hours=args.hours))
    for spec in args.layouts:
        layout = resolve_layout(spec, inp.topo)
        t0 = time.perf_counter()
        dispatch_series(inp.deltas, inp.topo, layout, threads=1)
        dt = time.perf_counter() - t0
        print(f"{spec:<10} {1000 * dt / args.hours:7.2f} ms/hour  (year estimate {dt * 8760 / args.hours:6.1f} s)")


if __name__ == "__main__":
    main()
