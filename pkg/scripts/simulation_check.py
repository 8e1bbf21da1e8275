"""Compare simulated mean sojourn times with the analytic delay on a grid of instances.

    python3 scripts/simulation_check.py --customers 1000000 --level 0.99
"""
import argparse
import csv
import itertools
import sys

from threshold_queue import ServicePolicy, waiting_time
from threshold_queue.sim import SimConfig, simulate


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--customers", type=int, default=1_000_000)
    parser.add_argument("--level", type=float, default=0.99)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--thresholds", default="1,2,3,5,10")
    parser.add_argument("--low-rates", default="0.2,0.5")
    parser.add_argument("--rates", default="0.3,0.6,0.8")
    args = parser.parse_args(argv)

    grid = itertools.product(
        [int(v) for v in args.thresholds.split(",")],
        [float(v) for v in args.low_rates.split(",")],
        [float(v) for v in args.rates.split(",")],
    )
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["T", "mu_l", "lambda", "W", "sim_mean", "half_width", "inside"])
    inside = total = 0
    for k, (T, m, lam) in enumerate(grid):
        pol = ServicePolicy(T, m)
        est = simulate(SimConfig(pol, lam, args.customers, seed=args.seed + k))
        w = waiting_time(pol, lam).w
        hw = est.half_width(args.level)
        hit = abs(est.mean_sojourn - w) <= hw
        inside += hit
        total += 1
        out.writerow([T, m, lam, f"{w:.6f}", f"{est.mean_sojourn:.6f}", f"{hw:.6f}", int(hit)])
    print(f"# {inside}/{total} analytic values inside the {args.level:.0%} interval", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
