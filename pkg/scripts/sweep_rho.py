#!/usr/bin/env python3
"""Privacy sweep: how T, K, the tree noise scale and the final certificate move
with rho on a fixed data budget.  Also runs an exact-gradient sanity check on
the quadratic (no estimation, no noise) so a broken driver shows up quickly.

    python scripts/sweep_rho.py --rho 0.25 0.5 1 2 4 inf --seeds 3
"""
import argparse

import numpy as np

from po2nc.harness import ExperimentConfig, _parse_rho, build_problem, run_experiment
from po2nc.o2nc import naive_counterpart, plan_run, run_o2nc


def quadratic_sanity(dim=5, M=50_000):
    cfg = ExperimentConfig(objective="quadratic", dim=dim, M=M, x0_norm=1.0, delta=0.1)
    obj, data, x0 = build_problem(cfg)
    plan = plan_run(dim, cfg.delta, cfg.L, cfg.F_star, M, oracle_kind="exact-debug")
    _, trace = run_o2nc(obj, data, plan, x0)
    norms = np.linalg.norm(trace.w_bar, axis=1)
    print(f"exact-debug quadratic: ||w_bar|| epoch 1 = {norms[0]:.4f}, "
          f"epoch {plan.K} = {norms[-1]:.4f} (start {np.linalg.norm(x0):.4f})")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rho", nargs="+", default=["0.25", "0.5", "1", "2", "4", "inf"])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--M", type=int, default=100_000)
    ap.add_argument("--dim", type=int, default=10)
    ap.add_argument("--n-mc", type=int, default=2000)
    ap.add_argument("--out", default="results/sweep")
    args = ap.parse_args()

    quadratic_sanity()
    print(f"{'rho':>6} {'T':>6} {'K':>5} {'sigma_tree':>11} {'sigma_naive':>12} {'last cert':>10}")
    for r in args.rho:
        rho = _parse_rho(r)
        cfg = ExperimentConfig(objective="capped", dim=args.dim, M=args.M, rho=rho,
                               seeds=list(range(args.seeds)), n_mc=args.n_mc, n_points=8,
                               out_dir=f"{args.out}/rho_{r}")
        plan = plan_run(cfg.dim, cfg.delta, cfg.L, cfg.F_star, cfg.M, rho)
        reps = run_experiment(cfg)
        last = np.median([rep["certs"][-1].value for rep in reps])
        print(f"{r:>6} {plan.T:>6} {plan.K:>5} {plan.sigma:11.4g} "
              f"{naive_counterpart(plan).sigma:12.4g} {last:10.4f}")


if __name__ == "__main__":
    main()
