import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from po2nc.o2nc import (ExactDebugOracle, NaiveOracle, OracleOrderError, PlanInfeasible,
                        RunPlan, TreeOracle, horizon_T, iterate_geometry, minimal_feasible_M,
                        naive_counterpart, partition_dataset, partition_indices,
                        plan_run, run_o2nc, run_streams)
from po2nc.objectives import (DataLinearObjective, make_linear,
                              make_piecewise_linear_regression, make_quadratic)


def manual_plan(T=4, K=2, B1=None, B2=1, delta=0.1, d=2, **kw):
    B1 = T + 1 if B1 is None else B1
    M = K * (B1 + B2 * (T - 1))
    return RunPlan(d=d, delta=delta, L=1.0, F_star=1.0, M=M, rho=kw.pop("rho", math.inf),
                   T=T, K=K, B1=B1, B2=B2, D=delta / T, **kw)


def test_plan_reference_example():
    # (sqrt(4) * 0.5 * 1e5 / 1.5) ** (2/3) = 1644.14...
    assert (2 * 0.5 * 1e5 / 1.5) ** (2 / 3) == pytest.approx(1644.14, abs=0.01)
    plan = plan_run(4, 0.5, 1.0, 1.0, 100_000)
    assert (plan.T, plan.K, plan.B1, plan.B2) == (1644, 30, 1645, 1)
    assert plan.M == 98_640 and plan.M_available == 100_000
    assert plan.D == pytest.approx(0.5 / 1644, rel=1e-15)


def test_private_plan_uses_smaller_horizon():
    public = plan_run(10, 0.1, 1.0, 1.0, 200_000)
    private = plan_run(10, 0.1, 1.0, 1.0, 200_000, rho=1.0)
    assert private.T < public.T
    # second branch: (10**1.5 * 0.1 * 2e5 / 1.1) ** 0.5
    assert private.T == math.floor((10 ** 1.5 * 0.1 * 2e5 / 1.1) ** 0.5)


def test_infeasible_plan_reports_minimum():
    with pytest.raises(PlanInfeasible) as info:
        plan_run(4, 0.5, 1.0, 1.0, 3)
    m = info.value.min_M
    assert m == minimal_feasible_M(4, 0.5, 1.0, 1.0)
    plan_run(4, 0.5, 1.0, 1.0, m)
    with pytest.raises(PlanInfeasible):
        plan_run(4, 0.5, 1.0, 1.0, m - 1)


@settings(max_examples=60, deadline=None)
@given(M=st.integers(50, 10 ** 7), d=st.integers(1, 50), rho=st.sampled_from([math.inf, 0.5, 4.0]))
def test_tree_plan_consumes_2KT(M, d, rho):
    try:
        plan = plan_run(d, 0.1, 1.0, 1.0, M, rho)
    except PlanInfeasible:
        return
    assert plan.M == 2 * plan.K * plan.T <= M
    assert plan.K == M // (2 * plan.T)
    assert plan.T == math.floor(horizon_T(d, 0.1, 1.0, 1.0, M, rho) * (1 + 1e-12))


def test_naive_counterpart_shares_horizon():
    plan = plan_run(10, 0.1, 1.0, 1.0, 200_000, rho=1.0)
    naive = naive_counterpart(plan)
    assert naive.T == plan.T and naive.B1 == naive.B2 == 1
    assert naive.K == 200_000 // plan.T and naive.M == naive.K * plan.T
    assert naive.sigma == pytest.approx(10.0, rel=1e-15)


@pytest.mark.parametrize("changes", [
    {"T": 1}, {"K": 0}, {"M": 7}, {"D": 0.5}, {"B1": 1}, {"oracle_kind": "bogus"},
    {"rho": 0.0},
])
def test_run_plan_validation(changes):
    base = manual_plan().to_dict()
    base.update(changes)
    with pytest.raises(ValueError):
        RunPlan.from_dict(base)


def test_run_plan_dict_roundtrip():
    plan = plan_run(5, 0.2, 1.0, 1.0, 50_000, rho=2.0, seed=4)
    assert RunPlan.from_dict(plan.to_dict()) == plan
    public = plan_run(5, 0.2, 1.0, 1.0, 50_000)
    assert public.to_dict()["rho"] is None and public.to_dict()["sigma"] == 0.0
    assert RunPlan.from_dict(public.to_dict()) == public


def test_partition_contiguous_example():
    plan = manual_plan(T=2, K=1, B1=3, B2=1)
    idx = partition_indices(4, plan, shuffle=False)
    assert [[list(b) for b in e] for e in idx] == [[[0, 1, 2], [3]]]
    data = np.arange(8.0).reshape(4, 2)
    parts = partition_dataset(data, plan, shuffle=False)
    assert np.array_equal(parts[0][1], data[3:4])


def test_partition_disjoint_and_deterministic():
    plan = manual_plan(T=8, K=5, seed=3)
    a = partition_indices(100, plan)
    b = partition_indices(100, plan)
    flat = np.concatenate([i for e in a for i in e])
    assert len(flat) == plan.M == len(set(flat.tolist()))
    assert all(np.array_equal(x, y) for ea, eb in zip(a, b) for x, y in zip(ea, eb))
    assert [len(i) for i in a[0]] == [9] + [1] * 7
    with pytest.raises(ValueError):
        partition_indices(plan.M - 1, plan)


def test_streams_are_independent_and_reproducible():
    s1, s2 = run_streams(7), run_streams(7)
    draws = {k: s1[k].random() for k in s1}
    assert draws == {k: s2[k].random() for k in s2}
    assert len(set(draws.values())) == len(draws)


def test_zero_objective_stays_at_start():
    f = DataLinearObjective(3, 1.0)
    plan = manual_plan(T=8, K=3, d=3, rho=1.0)
    x0 = np.array([0.5, -0.25, 1.0])
    out, trace = run_o2nc(f, np.zeros((plan.M, 3)), plan.replace(rho=math.inf), x0)
    assert np.array_equal(out, x0)
    assert np.array_equal(trace.x_final, x0)


def test_trace_structure_and_interpolation():
    f, data = make_piecewise_linear_regression(4, 400, np.random.default_rng(0), capped=True)
    plan = manual_plan(T=16, K=3, d=4, rho=2.0, seed=1)
    out, tr = run_o2nc(f, data, plan)
    assert tr.w.shape == (3, 16, 4) and tr.s.shape == (3, 16)
    assert np.array_equal(out, tr.w_bar[tr.output_index])
    assert np.all(tr.deltas[:, 0] == 0)          # OSD restarts every epoch
    for k in range(3):
        x = tr.x_start[k] + np.concatenate([np.zeros((1, 4)), np.cumsum(tr.deltas[k], 0)[:-1]])
        np.testing.assert_allclose(tr.w[k], x + tr.s[k][:, None] * tr.deltas[k], atol=1e-15)
    np.testing.assert_allclose(tr.x_start[1:], tr.x_start[:-1] + tr.deltas.sum(1)[:-1], atol=1e-14)
    assert len(list(tr.records())) == 48
    geo = iterate_geometry(tr)
    assert geo["max_delta"] <= plan.D * (1 + 1e-12)
    assert geo["max_step"] <= 2 * plan.D * (1 + 1e-12)
    assert geo["max_spread"] <= plan.delta


def test_run_is_deterministic():
    f, data = make_piecewise_linear_regression(3, 300, np.random.default_rng(0), capped=True)
    plan = manual_plan(T=8, K=4, d=3, rho=1.0, seed=5)
    _, a = run_o2nc(f, data, plan)
    _, b = run_o2nc(f, data, plan)
    for name in ("w", "deltas", "grads", "pre_noise", "s", "w_bar"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert a.output_index == b.output_index
    _, c = run_o2nc(f, data, plan.replace(seed=6))
    assert not np.array_equal(a.w, c.w)


def test_noise_free_and_noisy_runs_share_first_release():
    f, data = make_piecewise_linear_regression(3, 300, np.random.default_rng(0), capped=True)
    plan = manual_plan(T=8, K=2, d=3, rho=1.0, seed=2)
    _, noisy = run_o2nc(f, data, plan)
    _, clean = run_o2nc(f, data, plan.replace(rho=math.inf))
    assert np.array_equal(noisy.pre_noise[0, 0], clean.pre_noise[0, 0])
    assert np.all(clean.noise_norms == 0) and np.all(noisy.noise_norms > 0)


def test_tree_oracle_rejects_out_of_order():
    f, data = make_piecewise_linear_regression(2, 100, np.random.default_rng(0))
    plan = manual_plan(T=4, K=2)
    batches = partition_dataset(data, plan)
    oracle = TreeOracle(f, plan, batches, np.random.default_rng(0), np.random.default_rng(1))
    oracle.step(1, 1, np.zeros(2))
    with pytest.raises(OracleOrderError):
        oracle.step(1, 3, np.zeros(2))
    oracle.step(1, 2, np.zeros(2))
    with pytest.raises(OracleOrderError):
        oracle.step(2, 3, np.zeros(2))
    oracle.step(2, 1, np.zeros(2))               # t = 1 always starts a fresh epoch


def test_naive_oracle_exact_on_1d_linear():
    f = make_linear([2.0])
    plan = plan_run(1, 0.1, 2.0, 1.0, 5000, oracle_kind="naive")
    batches = partition_dataset(np.zeros((5000, 1)), plan)
    oracle = NaiveOracle(f, plan, batches, np.random.default_rng(0), np.random.default_rng(1))
    for t in range(1, 6):
        assert oracle.step(1, t, np.array([0.3 * t]))[0] == pytest.approx(2.0, rel=1e-14)


def test_exact_debug_oracle_decreases_quadratic():
    f = make_quadratic(3)
    plan = plan_run(3, 0.1, 1.0, 1.0, 20_000, oracle_kind="exact-debug")
    x0 = np.array([0.6, 0.0, -0.8])
    out, trace = run_o2nc(f, np.zeros((20_000, 1)), plan, x0)
    assert np.linalg.norm(trace.w_bar[-1]) < np.linalg.norm(x0)
    oracle = ExactDebugOracle(f, plan, [[np.zeros((2, 1))]])
    assert np.array_equal(oracle.step(1, 1, x0), x0)
