#!/usr/bin/env python3
"""Capped-loss benchmark: non-private vs private runs over several seeds.

Prints the median epoch-1 and last-epoch inner-average certificates per
setting and writes the usual results.csv / summary.json under --out.

    python scripts/run_benchmark.py --seeds 10 --rho inf 1 --out results/bench
"""
import argparse
import math
import time
from pathlib import Path

import numpy as np

from po2nc.harness import ExperimentConfig, _parse_rho, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--rho", nargs="+", default=["inf", "1"])
    ap.add_argument("--M", type=int, default=200_000)
    ap.add_argument("--dim", type=int, default=10)
    ap.add_argument("--delta", type=float, default=0.1)
    ap.add_argument("--n-mc", type=int, default=4000)
    ap.add_argument("--out", default="results/benchmark")
    args = ap.parse_args()

    print(f"{'rho':>8} {'T':>6} {'K':>5} {'epoch-1':>9} {'last':>9} {'ratio':>7} {'secs':>7}")
    for r in args.rho:
        rho = _parse_rho(r)
        tag = "nonprivate" if math.isinf(rho) else f"rho{rho:g}"
        cfg = ExperimentConfig(objective="capped", dim=args.dim, delta=args.delta, M=args.M,
                               rho=rho, seeds=list(range(args.seeds)), n_mc=args.n_mc,
                               n_points=8, out_dir=str(Path(args.out) / tag))
        t0 = time.perf_counter()
        reps = run_experiment(cfg)
        first = np.median([rep["certs"][0].value for rep in reps])
        last = np.median([rep["certs"][-1].value for rep in reps])
        plan = reps[0]["plan"]
        print(f"{r:>8} {plan.T:>6} {plan.K:>5} {first:9.4f} {last:9.4f} "
              f"{last / first:7.3f} {time.perf_counter() - t0:7.1f}")


if __name__ == "__main__":
    main()
