"""Online-to-nonconvex conversion with pluggable private gradient oracles.

Round indices ``k`` (epoch) and ``t`` (step) are 1-based throughout, matching
the tree mechanism's interval arithmetic.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .oco import OsdState
from .privacy import naive_sigma, sigma_schedule
from .smoothing import (SmoothingParams, _grad_core, diff_estimate,
                        grad_estimate, sample_directions)
from .tree import TreeState

ORACLE_KINDS = ("tree", "naive", "exact-debug")
_STREAMS = ("shuffle", "interp", "directions", "noise", "select")


class PlanInfeasible(ValueError):
    """Raised when the data budget cannot support T >= 2 and K >= 1."""

    def __init__(self, message, min_M):
        super().__init__(message)
        self.min_M = min_M


class OracleOrderError(RuntimeError):
    """An oracle was queried with round indices out of sequence."""


@dataclass(frozen=True)
class RunPlan:
    d: int
    delta: float
    L: float
    F_star: float
    M: int
    rho: float
    T: int
    K: int
    B1: int
    B2: int
    D: float
    seed: int = 0
    oracle_kind: str = "tree"
    M_available: int | None = None

    def __post_init__(self):
        if self.oracle_kind not in ORACLE_KINDS:
            raise ValueError(f"unknown oracle kind {self.oracle_kind!r}")
        if self.T < 2 or self.K < 1:
            raise ValueError(f"need T >= 2 and K >= 1, got T={self.T}, K={self.K}")
        if self.M != self.K * (self.B1 + self.B2 * (self.T - 1)):
            raise ValueError("M must equal K * (B1 + B2 * (T - 1))")
        if not math.isclose(self.D, self.delta / self.T, rel_tol=1e-12):
            raise ValueError("domain radius D must equal delta / T")
        if self.oracle_kind == "naive":
            if self.B1 != self.B2:
                raise ValueError("the naive oracle uses one batch size B1 == B2")
        elif 2 * self.B1 < self.T * self.B2:
            raise ValueError("tree oracle needs B1 >= T * B2 / 2")
        if not self.rho > 0:
            raise ValueError("rho must be positive (inf for non-private)")

    @property
    def private(self) -> bool:
        return math.isfinite(self.rho)

    @property
    def sigma(self) -> float:
        """Noise scale of one released vector (tree: per stored node)."""
        if self.oracle_kind == "naive":
            return naive_sigma(self.d, self.L, self.B2, self.rho)
        if self.oracle_kind == "exact-debug":
            return 0.0
        return sigma_schedule(self.d, self.L, self.B2, self.T, self.rho)

    def replace(self, **changes) -> "RunPlan":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["rho"] = None if math.isinf(self.rho) else self.rho
        out["sigma"] = self.sigma
        return out

    @classmethod
    def from_dict(cls, data) -> "RunPlan":
        fields = {f.name for f in dataclasses.fields(cls)}
        kw = {k: v for k, v in data.items() if k in fields}
        if kw.get("rho") is None:
            kw["rho"] = math.inf
        return cls(**kw)


def horizon_T(d, delta, L, F_star, M, rho=math.inf) -> float:
    """Real-valued epoch length balancing optimization and privacy error."""
    scale = F_star + L * delta
    first = (math.sqrt(d) * L * delta * M / scale) ** (2.0 / 3.0)
    if math.isinf(rho):
        return first
    second = (d ** 1.5 * L * delta * M / (scale * rho)) ** 0.5
    return min(first, second)


def _shape(T_real, M, oracle_kind):
    T = math.floor(T_real * (1 + 1e-12))
    if T < 2:
        return T, 0
    per_epoch = T if oracle_kind == "naive" else 2 * T
    return T, M // per_epoch


def minimal_feasible_M(d, delta, L, F_star, rho=math.inf, oracle_kind="tree") -> int:
    def ok(M):
        T, K = _shape(horizon_T(d, delta, L, F_star, M, rho), M, oracle_kind)
        return T >= 2 and K >= 1

    hi = 1
    while not ok(hi):
        hi *= 2
        if hi > 1 << 62:
            raise ArithmeticError("no feasible data size found")
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def plan_run(d, delta, L, F_star, M, rho=math.inf, *, seed=0, oracle_kind="tree") -> RunPlan:
    """Resolve every run hyperparameter from the data budget M.

    Tree and exact-debug plans use B1 = T + 1, B2 = 1 and consume 2KT points;
    naive plans use one data point per step (B = 1) and K = floor(M / T).
    Leftover data is unused.
    """
    for name, v in (("d", d), ("delta", delta), ("L", L), ("F_star", F_star), ("M", M)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    if not rho > 0:
        raise ValueError(f"rho must be positive (inf for non-private), got {rho}")
    if oracle_kind not in ORACLE_KINDS:
        raise ValueError(f"unknown oracle kind {oracle_kind!r}")
    T, K = _shape(horizon_T(d, delta, L, F_star, M, rho), M, oracle_kind)
    if T < 2 or K < 1:
        min_M = minimal_feasible_M(d, delta, L, F_star, rho, oracle_kind)
        raise PlanInfeasible(
            f"data size M={M} gives T={T}, K={K}; need T >= 2 and K >= 1 "
            f"(minimal feasible M = {min_M})", min_M)
    if oracle_kind == "naive":
        B1 = B2 = 1
    else:
        B1, B2 = T + 1, 1
    used = K * (B1 + B2 * (T - 1))
    return RunPlan(d=d, delta=delta, L=L, F_star=F_star, M=used, rho=rho, T=T, K=K,
                   B1=B1, B2=B2, D=delta / T, seed=seed, oracle_kind=oracle_kind,
                   M_available=M)


def naive_counterpart(plan: RunPlan) -> RunPlan:
    """Same T, delta and budget as ``plan`` but for the naive oracle with B = 1."""
    available = plan.M_available or plan.M
    K = available // plan.T
    return plan.replace(oracle_kind="naive", B1=1, B2=1, K=K, M=K * plan.T)


def partition_indices(n_available, plan: RunPlan, rng=None, *, shuffle=True):
    """Index arrays ``[k][t]`` (0-based lists) after one seeded shuffle."""
    if n_available < plan.M:
        raise ValueError(f"dataset has {n_available} points, plan needs {plan.M}")
    order = np.arange(n_available)
    if shuffle:
        if rng is None:
            rng = run_streams(plan.seed)["shuffle"]
        order = rng.permutation(n_available)
    out = []
    pos = 0
    for _ in range(plan.K):
        epoch = []
        for t in range(plan.T):
            size = plan.B1 if t == 0 else plan.B2
            epoch.append(order[pos:pos + size])
            pos += size
        out.append(epoch)
    return out


def partition_dataset(dataset, plan: RunPlan, rng=None, *, shuffle=True):
    data = np.asarray(dataset)
    idx = partition_indices(len(data), plan, rng, shuffle=shuffle)
    return [[data[i] for i in epoch] for epoch in idx]


def run_streams(seed) -> dict:
    """Independent generators for each source of randomness in a run.

    Keeping them separate means a noise-free and a noisy run with one seed
    share their shuffle, interpolation and direction draws.
    """
    seqs = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {name: np.random.default_rng(s) for name, s in zip(_STREAMS, seqs)}


class TreeOracle:
    """Variance-reduced oracle: gradient estimate at t=1, then running sums of
    difference estimates, released through the tree mechanism."""

    def __init__(self, objective, plan, batches, direction_rng, noise_rng):
        self.f = objective
        self.plan = plan
        self.batches = batches
        self.sp = SmoothingParams(plan.delta, plan.d, plan.L)
        self.sigma = plan.sigma
        self.tree = TreeState(plan.T, self.sigma, plan.d)
        self.direction_rng = direction_rng
        self.noise_rng = noise_rng
        self.g_running = None
        self.w_prev = None
        self.last_noise = None
        self._k, self._t = None, 0

    def step(self, k, t, w):
        w = np.asarray(w, dtype=float)
        batch = self.batches[k - 1][t - 1]
        if t == 1:
            self.tree.reset()
            self.g_running = grad_estimate(self.f, self.sp, w, batch, self.direction_rng)
        else:
            if k != self._k or t != self._t + 1:
                raise OracleOrderError(
                    f"got (k={k}, t={t}) after (k={self._k}, t={self._t})")
            inc = diff_estimate(self.f, self.sp, w, self.w_prev, batch, self.direction_rng)
            self.g_running = self.g_running + inc
        self._k, self._t = k, t
        self.w_prev = w.copy()
        self.last_noise = self.tree.noise(t, self.noise_rng)
        return self.g_running + self.last_noise


class NaiveOracle:
    """One two-point estimate per data point plus fresh Gaussian noise each step."""

    def __init__(self, objective, plan, batches, direction_rng, noise_rng):
        self.f = objective
        self.plan = plan
        self.batches = batches
        self.sp = SmoothingParams(plan.delta, plan.d, plan.L)
        self.sigma = plan.sigma
        self.direction_rng = direction_rng
        self.noise_rng = noise_rng
        self.g_running = None
        self.last_noise = None

    def step(self, k, t, w):
        w = np.asarray(w, dtype=float)
        batch = np.asarray(self.batches[k - 1][t - 1], dtype=float)
        U = sample_directions((1, len(batch), 1), self.plan.d, self.direction_rng)
        self.g_running = _grad_core(self.f, self.sp, w, batch[None], U)[0]
        if self.sigma > 0:
            self.last_noise = self.sigma * self.noise_rng.standard_normal(self.plan.d)
        else:
            self.last_noise = np.zeros(self.plan.d)
        return self.g_running + self.last_noise


class ExactDebugOracle:
    """Batch-averaged a.e. gradient at the query point; no estimation, no noise."""

    def __init__(self, objective, plan, batches, direction_rng=None, noise_rng=None):
        self.f = objective
        self.plan = plan
        self.batches = batches
        self.sigma = 0.0
        self.g_running = None
        self.last_noise = np.zeros(plan.d)

    def step(self, k, t, w):
        batch = np.asarray(self.batches[k - 1][t - 1], dtype=float)
        W = np.broadcast_to(np.asarray(w, dtype=float), (len(batch), self.plan.d))
        self.g_running = self.f.grads_ae(W, batch).mean(axis=0)
        return self.g_running.copy()


_ORACLES = {"tree": TreeOracle, "naive": NaiveOracle, "exact-debug": ExactDebugOracle}


def make_oracle(objective, plan, batches, direction_rng, noise_rng):
    return _ORACLES[plan.oracle_kind](objective, plan, batches, direction_rng, noise_rng)


@dataclass
class Trace:
    """Everything a run produced, indexed [k - 1, t - 1]."""

    plan: RunPlan
    w: np.ndarray            # query points w_t^k, (K, T, d)
    deltas: np.ndarray       # OSD outputs Delta_t^k, (K, T, d)
    grads: np.ndarray        # released oracle outputs, (K, T, d)
    pre_noise: np.ndarray    # oracle outputs before noise, (K, T, d)
    noise_norms: np.ndarray  # (K, T)
    s: np.ndarray            # interpolation weights, (K, T)
    x_start: np.ndarray      # x_1^k, (K, d)
    x_final: np.ndarray
    w_bar: np.ndarray        # epoch averages, (K, d)
    output_index: int        # 0-based epoch chosen as output
    batch_indices: list
    sigma: float = 0.0       # noise scale the oracle actually used

    @property
    def output(self) -> np.ndarray:
        return self.w_bar[self.output_index]

    def records(self):
        """One dict per (k, t) step."""
        g_norms = np.linalg.norm(self.grads, axis=-1)
        d_norms = np.linalg.norm(self.deltas, axis=-1)
        K, T = self.s.shape
        for k in range(K):
            for t in range(T):
                yield {"k": k + 1, "t": t + 1, "s": float(self.s[k, t]),
                       "g_norm": float(g_norms[k, t]),
                       "noise_norm": float(self.noise_norms[k, t]),
                       "delta_norm": float(d_norms[k, t])}


def run_o2nc(objective, dataset, plan: RunPlan, x0=None):
    """Run K epochs of T steps; returns (chosen epoch average, trace)."""
    streams = run_streams(plan.seed)
    dataset = np.asarray(dataset, dtype=float)
    idx = partition_indices(len(dataset), plan, streams["shuffle"])
    batches = [[dataset[i] for i in epoch] for epoch in idx]
    oracle = make_oracle(objective, plan, batches, streams["directions"], streams["noise"])
    interp = streams["interp"]

    K, T, d = plan.K, plan.T, plan.d
    W = np.empty((K, T, d))
    deltas = np.empty((K, T, d))
    grads = np.empty((K, T, d))
    pre = np.empty((K, T, d))
    noise_norms = np.empty((K, T))
    s_all = np.empty((K, T))
    x_start = np.empty((K, d))

    x = np.zeros(d) if x0 is None else np.array(x0, dtype=float)
    osd = OsdState(d, plan.D)
    for k in range(1, K + 1):
        osd.reset()
        x_start[k - 1] = x
        for t in range(1, T + 1):
            delta_t = osd.delta_vec.copy()
            s = interp.random()
            w = x + s * delta_t
            x = x + delta_t
            g = oracle.step(k, t, w)
            osd.step(g)
            W[k - 1, t - 1] = w
            deltas[k - 1, t - 1] = delta_t
            grads[k - 1, t - 1] = g
            pre[k - 1, t - 1] = oracle.g_running
            noise_norms[k - 1, t - 1] = np.linalg.norm(oracle.last_noise)
            s_all[k - 1, t - 1] = s

    w_bar = W.mean(axis=1)
    choice = int(streams["select"].integers(K))
    trace = Trace(plan, W, deltas, grads, pre, noise_norms, s_all, x_start, x,
                  w_bar, choice, idx, float(oracle.sigma))
    return w_bar[choice].copy(), trace


def iterate_geometry(trace: Trace) -> dict:
    """Largest ||Delta||, ||w_{t+1} - w_t|| and ||w_t - w_bar^k|| over the run."""
    steps = np.linalg.norm(np.diff(trace.w, axis=1), axis=-1)
    spread = np.linalg.norm(trace.w - trace.w_bar[:, None, :], axis=-1)
    return {"max_delta": float(np.linalg.norm(trace.deltas, axis=-1).max()),
            "max_step": float(steps.max()) if steps.size else 0.0,
            "max_spread": float(spread.max())}
