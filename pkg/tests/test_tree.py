import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from po2nc.tree import Interval, TreeState, node, private_prefix_sum, tree_noise, tree_reset


def binary_expansion_intervals(t):
    """Independent oracle: one interval per set bit of t, high bit first."""
    out, lo = [], 0
    for b in reversed(range(t.bit_length())):
        if (t >> b) & 1:
            out.append((lo + 1, lo + 2 ** b))
            lo += 2 ** b
    return out


def test_node_reference_values():
    assert node(7) == [(1, 4), (5, 6), (7, 7)]
    assert node(8) == [(1, 8)]
    assert node(1) == [(1, 1)]
    assert node(5) == [(1, 4), (5, 5)]
    assert isinstance(node(3)[0], Interval)


@pytest.mark.parametrize("t", [0, -3, 2.5])
def test_node_rejects_bad_index(t):
    with pytest.raises(ValueError):
        node(t)


@given(st.integers(min_value=1, max_value=1 << 20))
def test_node_matches_binary_expansion(t):
    assert [tuple(iv) for iv in node(t)] == binary_expansion_intervals(t)


def test_node_partitions_prefix():
    for t in range(1, 4097):
        ivs = node(t)
        assert ivs[0].lo == 1 and ivs[-1].hi == t
        for a, b in zip(ivs, ivs[1:]):
            assert b.lo == a.hi + 1
        assert all(iv.lo <= iv.hi for iv in ivs)
        assert len(ivs) <= math.ceil(math.log2(t)) + 1
        if t >= 2:
            assert len(ivs) <= 2 * math.log(t)


def test_zero_sigma_gives_zero_noise():
    state = TreeState(16, 0.0, 3)
    rng = np.random.default_rng(0)
    for t in range(1, 17):
        assert np.array_equal(state.noise(t, rng), np.zeros(3))


def test_requery_within_epoch_returns_stored_noise():
    state = TreeState(8, 1.0, 2)
    rng = np.random.default_rng(5)
    tree_reset(state)
    first = tree_noise(state, 1, rng)
    again = tree_noise(state, 1, rng)
    assert np.array_equal(first, again)


def test_single_interval_at_power_of_two():
    state = TreeState(8, 1.0, 2)
    rng = np.random.default_rng(1)
    for t in range(1, 9):
        out = state.noise(t, rng)
    assert np.array_equal(out, state.noise_store[8])


def test_noise_reuse_across_queries():
    state = TreeState(16, 1.0, 2)
    rng = np.random.default_rng(2)
    outs = {t: state.noise(t, rng) for t in range(1, 17)}
    # node(5) and node(6) both start with (1, 4)
    assert np.array_equal(outs[5] - state.noise_store[5], state.noise_store[4])
    assert np.array_equal(outs[6] - state.noise_store[6], state.noise_store[4])
    assert np.array_equal(outs[7], state.noise_store[4] + state.noise_store[6] + state.noise_store[7])


def test_out_of_order_and_range_rejected():
    state = TreeState(4, 1.0, 1)
    rng = np.random.default_rng(0)
    state.noise(3, rng)
    with pytest.raises(ValueError):
        state.noise(2, rng)
    with pytest.raises(ValueError):
        state.noise(5, rng)


def test_epochs_draw_independent_noise():
    state = TreeState(4, 1.0, 3)
    rng = np.random.default_rng(9)
    first = state.noise(1, rng)
    state.reset()
    second = state.noise(1, rng)
    assert not np.array_equal(first, second)


def test_tree_noise_second_moment_t7():
    d, sigma, n = 3, 0.5, 10_000
    state = TreeState(7, sigma, d)
    rng = np.random.default_rng(11)
    sq = np.empty(n)
    for e in range(n):
        state.reset()
        for t in range(1, 8):
            out = state.noise(t, rng)
        sq[e] = out @ out
    assert abs(sq.mean() / (3 * d * sigma ** 2) - 1) < 0.05


def test_prefix_sum_exact_without_noise():
    basis = [np.eye(3)[i] for i in range(3)]
    outs = list(private_prefix_sum(basis, TreeState(3, 0.0, 3), np.random.default_rng(0)))
    expected = np.cumsum(np.eye(3), axis=0)
    for got, want in zip(outs, expected):
        assert np.array_equal(got, want)

    zeros = list(private_prefix_sum([np.zeros(2)] * 5, TreeState(5, 0.0, 2),
                                    np.random.default_rng(0)))
    assert all(not z.any() for z in zeros)


def test_prefix_sum_bit_identical_to_running_sum():
    rng = np.random.default_rng(4)
    incs = rng.standard_normal((50, 4))
    outs = list(private_prefix_sum(incs, TreeState(50, 0.0, 4), np.random.default_rng(0)))
    running = incs[0].copy()
    assert np.array_equal(outs[0], running)
    for inc, out in zip(incs[1:], outs[1:]):
        running = running + inc
        assert np.array_equal(out, running)


def test_prefix_sum_noise_replays():
    incs = np.random.default_rng(3).standard_normal((12, 2))
    state = TreeState(12, 0.3, 2)
    outs = list(private_prefix_sum(incs, state, np.random.default_rng(7)))
    replay = TreeState(12, 0.3, 2)
    rng = np.random.default_rng(7)
    exact = np.cumsum(incs, axis=0)
    for t, out in enumerate(outs, start=1):
        np.testing.assert_allclose(out - exact[t - 1], replay.noise(t, rng), atol=1e-12)


def test_prefix_sum_feeds_releases_back_to_generator():
    seen = []

    def adaptive():
        released = yield np.ones(2)
        for _ in range(3):
            seen.append(released.copy())
            released = yield -0.5 * released

    outs = list(private_prefix_sum(adaptive(), TreeState(4, 0.0, 2), np.random.default_rng(0)))
    assert len(outs) == 4
    assert np.array_equal(seen[0], np.ones(2))
    assert np.array_equal(outs[1], np.full(2, 0.5))
