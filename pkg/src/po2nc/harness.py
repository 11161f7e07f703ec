"""Seeded experiment runner and oracle comparison with CSV/JSON export.

Config files are flat JSON objects; see ``ExperimentConfig`` for keys and
defaults.  ``rho`` may be a number or null / "none" / "inf" for non-private.

Outputs of ``run_experiment`` in ``out_dir``:

* ``results.csv``: one ``epoch`` row per (seed, epoch) and one ``final`` row per
  seed, columns ``RESULT_COLUMNS``.
* ``summary.json``: version, resolved config and plan, per-seed outputs.
* ``timing.json``: wall-clock seconds per seed (kept out of the two files above
  so they are byte-reproducible).
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .o2nc import naive_counterpart, plan_run, run_o2nc
from .objectives import (DataLinearObjective, L1Objective, make_linear,
                         make_piecewise_linear_regression, make_quadratic,
                         save_dataset_csv)
from .stationarity import ball_sample_certificate, inner_average_certificate
from .tree import node

RESULT_COLUMNS = ["row_type", "seed", "oracle_kind", "rho", "T", "K", "epoch",
                  "certificate", "certificate_stderr", "data_used", "ball_certificate"]
COMPARE_COLUMNS = ["seed", "oracle_kind", "T", "K", "B", "sigma",
                   "mean_release_noise_var", "last_certificate", "output_certificate"]
OBJECTIVE_KINDS = ("capped", "abs", "quadratic", "linear", "l1", "data-linear")


def _parse_rho(value):
    if value is None:
        return math.inf
    if isinstance(value, str):
        if value.lower() in ("none", "inf", "non-private"):
            return math.inf
        value = float(value)
    value = float(value)
    if not value > 0:
        raise ValueError(f"rho must be positive, got {value}")
    return value


@dataclass
class ExperimentConfig:
    objective: str = "capped"
    dim: int = 10
    cap: float = 1.0
    noise_std: float = 0.1
    x_star_norm: float = 2.0
    x0_norm: float = 0.0
    data_seed: int = 123
    n_data: int | None = None
    delta: float = 0.1
    L: float = 1.0
    F_star: float = 1.0
    M: int = 200_000
    rho: float = math.inf
    oracle_kind: str = "tree"
    seeds: list = field(default_factory=lambda: [0])
    out_dir: str = "results"
    n_mc: int = 2000
    n_points: int = 64
    cert_seed: int = 0
    save_dataset: bool = False

    def __post_init__(self):
        self.rho = _parse_rho(self.rho)
        if self.objective not in OBJECTIVE_KINDS:
            raise ValueError(f"unknown objective {self.objective!r}")
        for name in ("dim", "delta", "L", "F_star", "M", "n_mc", "n_points"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if len(self.seeds) < 1:
            raise ValueError("need at least one replicate seed")
        self.seeds = [int(s) for s in self.seeds]

    @classmethod
    def from_json(cls, path, **overrides) -> "ExperimentConfig":
        with open(path) as fh:
            data = json.load(fh)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["rho"] = None if math.isinf(self.rho) else self.rho
        return out


def build_problem(config: ExperimentConfig):
    """Objective, dataset and start point, all determined by ``data_seed``."""
    rng = np.random.default_rng(config.data_seed)
    n = config.n_data or config.M
    d = config.dim
    if config.objective in ("capped", "abs"):
        obj, data = make_piecewise_linear_regression(
            d, n, rng, capped=config.objective == "capped", cap=config.cap,
            noise_std=config.noise_std, x_star_norm=config.x_star_norm)
    else:
        obj = {
            "quadratic": lambda: make_quadratic(d, radius=config.L),
            "linear": lambda: make_linear(config.L * _unit(rng, d)),
            "l1": lambda: L1Objective(d),
            "data-linear": lambda: DataLinearObjective(d, config.L),
        }[config.objective]()
        data = obj.sample_data(rng, n)
    x0 = config.x0_norm * _unit(rng, d)
    return obj, data, x0


def _unit(rng, d):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def _fmt(v):
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def _epoch_certificates(obj, trace, config, seed):
    rng = np.random.default_rng([config.cert_seed, seed])
    plan = trace.plan
    certs = [inner_average_certificate(obj, trace.w[k], obj.sample_data, config.n_mc,
                                       rng, delta=plan.delta)
             for k in range(plan.K)]
    ball = ball_sample_certificate(obj, trace.output, plan.delta, config.n_points,
                                   config.n_mc, rng)
    return certs, ball


def _replicate(config, obj, data, x0, plan, seed):
    start = time.perf_counter()
    p = plan.replace(seed=seed)
    _, trace = run_o2nc(obj, data, p, x0)
    certs, ball = _epoch_certificates(obj, trace, config, seed)
    return {"seed": seed, "plan": p, "trace": trace, "certs": certs, "ball": ball,
            "wall_time": time.perf_counter() - start}


def _run_replicates(config, obj, data, x0, plan):
    threads = max(1, int(os.environ.get("PO2NC_THREADS", "1")))
    if threads == 1 or len(config.seeds) == 1:
        return [_replicate(config, obj, data, x0, plan, s) for s in config.seeds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_replicate, config, obj, data, x0, plan, s)
                   for s in config.seeds]
        return [f.result() for f in futures]


def result_rows(rep, config):
    plan = rep["plan"]
    per_epoch = plan.B1 + plan.B2 * (plan.T - 1)
    common = {"seed": rep["seed"], "oracle_kind": plan.oracle_kind, "rho": plan.rho,
              "T": plan.T, "K": plan.K}
    rows = []
    for k, cert in enumerate(rep["certs"], start=1):
        rows.append({"row_type": "epoch", **common, "epoch": k, "certificate": cert.value,
                     "certificate_stderr": cert.stderr, "data_used": k * per_epoch,
                     "ball_certificate": ""})
    out = rep["trace"].output_index
    cert = rep["certs"][out]
    rows.append({"row_type": "final", **common, "epoch": out + 1,
                 "certificate": cert.value, "certificate_stderr": cert.stderr,
                 "data_used": plan.M, "ball_certificate": rep["ball"].value})
    return rows


def write_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_experiment(config: ExperimentConfig):
    """Run every replicate seed and write results to ``config.out_dir``.

    Returns the list of replicate dicts (plan, trace, certificates).  Raises
    ``PlanInfeasible`` for too little data and ``OSError`` on IO failure.
    """
    obj, data, x0 = build_problem(config)
    plan = plan_run(config.dim, config.delta, config.L, config.F_star, config.M,
                    config.rho, oracle_kind=config.oracle_kind)
    reps = _run_replicates(config, obj, data, x0, plan)

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [r for rep in reps for r in result_rows(rep, config)]
    write_csv(out / "results.csv", rows, RESULT_COLUMNS)
    summary = {
        "version": __version__,
        "config": config.to_dict(),
        "plan": plan.to_dict(),
        "replicates": [{
            "seed": rep["seed"],
            "output_epoch": rep["trace"].output_index + 1,
            "output_certificate": rep["certs"][rep["trace"].output_index].value,
            "last_certificate": rep["certs"][-1].value,
            "first_certificate": rep["certs"][0].value,
            "ball_certificate": rep["ball"].value,
            "output_point": rep["trace"].output.tolist(),
        } for rep in reps],
    }
    _write_json(out / "summary.json", summary)
    _write_json(out / "timing.json",
                {str(rep["seed"]): rep["wall_time"] for rep in reps})
    if config.save_dataset and config.objective in ("capped", "abs"):
        save_dataset_csv(out / "dataset.csv", data)
    return reps


def noise_ratio_report(tree_plan, naive_plan, tree_sigma, naive_sigma):
    """Analytic per-release noise comparison between the two oracles.

    A naive release carries d * sigma_naive^2 of noise variance; the tree release
    at step t carries |node(t)| * d * sigma_tree^2.
    """
    T, d = tree_plan.T, tree_plan.d
    counts = np.array([len(node(t)) for t in range(1, T + 1)])
    report = {
        "T": T,
        "sigma_tree": tree_sigma,
        "sigma_naive": naive_sigma,
        "naive_release_var": d * naive_sigma ** 2,
        "tree_release_var_t1": float(counts[0] * d * tree_sigma ** 2),
        "tree_release_var_tT": float(counts[-1] * d * tree_sigma ** 2),
        "tree_release_var_mean": float(counts.mean() * d * tree_sigma ** 2),
        "theory_sigma_ratio": None,
        "theory_single_release_var_ratio": T ** 2 / (32.0 * math.log(T)),
        "sigma_ratio": None,
        "release_var_ratio_mean": None,
    }
    if naive_plan.B2 == 1 and tree_plan.B2 == 1:
        report["theory_sigma_ratio"] = T / (4.0 * math.sqrt(2.0 * math.log(T)))
    if tree_sigma > 0:
        report["sigma_ratio"] = naive_sigma / tree_sigma
        report["release_var_ratio_mean"] = report["naive_release_var"] / report["tree_release_var_mean"]
    return report


def compare_oracles(config: ExperimentConfig):
    """Matched-seed tree vs naive runs on one data budget; writes compare.{json,csv}."""
    obj, data, x0 = build_problem(config)
    tree_plan = plan_run(config.dim, config.delta, config.L, config.F_star, config.M,
                         config.rho, oracle_kind="tree")
    naive_plan = naive_counterpart(tree_plan)

    tree_cfg = dataclasses.replace(config, oracle_kind="tree")
    naive_cfg = dataclasses.replace(config, oracle_kind="naive")
    tree_reps = _run_replicates(tree_cfg, obj, data, x0, tree_plan)
    naive_reps = _run_replicates(naive_cfg, obj, data, x0, naive_plan)

    report = noise_ratio_report(tree_plan, naive_plan, tree_reps[0]["trace"].sigma,
                                naive_reps[0]["trace"].sigma)
    report["structural_note"] = (
        "naive oracle: one direction per data point, fresh noise each step, no "
        "variance reduction; trajectories differ even at zero noise")
    rows = []
    for rep in tree_reps + naive_reps:
        plan, trace = rep["plan"], rep["trace"]
        rows.append({"seed": rep["seed"], "oracle_kind": plan.oracle_kind, "T": plan.T,
                     "K": plan.K, "B": plan.B2, "sigma": trace.sigma,
                     "mean_release_noise_var": float(np.mean(trace.noise_norms ** 2)),
                     "last_certificate": rep["certs"][-1].value,
                     "output_certificate": rep["certs"][trace.output_index].value})
    for kind, reps in (("tree", tree_reps), ("naive", naive_reps)):
        report[f"median_last_certificate_{kind}"] = float(
            np.median([r["certs"][-1].value for r in reps]))

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "compare.csv", rows, COMPARE_COLUMNS)
    _write_json(out / "compare.json", {
        "version": __version__, "config": config.to_dict(),
        "tree_plan": tree_plan.to_dict(), "naive_plan": naive_plan.to_dict(),
        "report": report})
    return report, rows
