import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fogclnc.coalition import (
    CoalitionContext,
    Partition,
    init_partition,
    is_nash_stable,
    prefers,
    switch_phase,
    user_utility,
)
from fogclnc.idnc import DeliveryParams

from .conftest import make_cache, make_side
from .oracles import random_instance


def _ctx(caps, cache, side, params):
    return CoalitionContext(np.asarray(caps, float), cache, side, params)


def test_init_respects_coverage():
    side = make_side([set()] * 4, [0] * 4, 2)
    params = DeliveryParams(1, 0.5, 3.0, 5, (frozenset({0, 1}),))
    cache = make_cache(np.ones((2, 2)), 1)
    for seed in range(20):
        p = init_partition(side, cache, params, 2, np.random.default_rng(seed))
        assert p.coalitions[1] <= {0, 1}
        assert p.unassigned == frozenset()


def test_init_single_fap_takes_everyone():
    side = make_side([set()] * 5, [0, 1, 2, 3, 4], 6)
    params = DeliveryParams(1, 0.5, 3.0, 10**6)
    p = init_partition(side, make_cache(np.zeros((6, 1)), 1), params, 1, np.random.default_rng(0))
    assert p.coalitions == (frozenset(range(5)),)


def test_init_leaves_infeasible_users_out():
    # no cache and no fetching allowed: nobody can be served anywhere
    side = make_side([set()] * 3, [0, 1, 0], 2)
    params = DeliveryParams(1, 0.5, 3.0, 0)
    p = init_partition(side, make_cache(np.zeros((2, 1)), 1), params, 1, np.random.default_rng(0))
    assert p.unassigned == frozenset({0, 1, 2})


def test_init_budget_respected():
    side = make_side([set()] * 6, [0, 1, 2, 3, 4, 5], 6)
    params = DeliveryParams(2, 0.5, 3.0, 2)
    cache = make_cache(np.zeros((6, 2)), 2)
    p = init_partition(side, cache, params, 2, np.random.default_rng(1))
    for t, c in enumerate(p.coalitions):
        assert len({side.wants[u] for u in c}) <= 2
    assert len(p.unassigned) == 2


def test_init_deterministic():
    coalitions, caps, cache, side, params = random_instance(np.random.default_rng(4), max_users=5)
    n = caps.shape[0]
    a = init_partition(side, cache, params, n, np.random.default_rng(9))
    b = init_partition(side, cache, params, n, np.random.default_rng(9))
    assert a == b


def test_partition_rejects_overlap():
    with pytest.raises(ValueError):
        Partition((frozenset({0}), frozenset({0})), 1, 1)


def test_user_utility_cases():
    side = make_side([{1}, {0}], [0, 1], 2)
    params = DeliveryParams(1, 0.5, 3.0, 5)
    ctx = _ctx([[2.0, 2.0]], make_cache(np.ones((2, 1)), 1), side, params)
    p = Partition((frozenset({0, 1}),), 1, 2)
    assert user_utility(0, p, ctx) == 2.0
    assert user_utility(1, p.move(1, None), ctx) == 0.0


def test_assigned_but_not_targeted():
    # two users wanting different files with no side information: only one fits
    side = make_side([set(), set()], [0, 1], 2)
    params = DeliveryParams(1, 0.5, 3.0, 5)
    ctx = _ctx([[2.0, 1.0]], make_cache(np.ones((2, 1)), 1), side, params)
    p = Partition((frozenset({0, 1}),), 1, 2)
    assert user_utility(0, p, ctx) == 2.0
    assert user_utility(1, p, ctx) == 0.0


def test_prefers_rejects_full_budget():
    side = make_side([set()] * 2, [0, 1], 2)
    params = DeliveryParams(2, 0.5, 3.0, 1)
    cache = make_cache(np.array([[0, 1], [0, 1]]), 2)
    ctx = _ctx([[1.0, 5.0], [1.0, 1.0]], cache, side, params)
    p = Partition((frozenset({0}), frozenset({1})), 2, 2)
    assert not prefers(1, 0, p, ctx)


def test_prefers_requires_strict_gain():
    side = make_side([set()], [0], 1)
    params = DeliveryParams(2, 0.5, 3.0, 5)
    ctx = _ctx([[2.0], [2.0]], make_cache(np.ones((1, 2)), 2), side, params)
    p = Partition((frozenset({0}), frozenset()), 2, 1)
    assert not prefers(0, 1, p, ctx)


def test_prefers_hand_built_three_users():
    # users 0 and 1 share F-AP 0 but cannot be coded together; user 1 gains at F-AP 1
    side = make_side([set(), set(), {1}], [0, 1, 0], 2)
    params = DeliveryParams(2, 0.5, 3.0, 5)
    caps = [[3.0, 1.0, 1.0], [1.0, 2.0, 1.0]]
    ctx = _ctx(caps, make_cache(np.ones((2, 2)), 2), side, params)
    p = Partition((frozenset({0, 1}), frozenset({2})), 2, 3)
    before = ctx.coalition_value(1, frozenset({2}))
    after = ctx.coalition_value(1, frozenset({1, 2}))
    assert user_utility(1, p, ctx) == 0.0
    assert after > before
    assert prefers(1, 1, p, ctx)


def test_stable_partition_unchanged():
    side = make_side([set()], [0], 1)
    params = DeliveryParams(2, 0.5, 3.0, 5)
    ctx = _ctx([[3.0], [1.0]], make_cache(np.ones((1, 2)), 2), side, params)
    p = Partition((frozenset({0}), frozenset()), 2, 1)
    res = switch_phase(p, ctx)
    assert res.partition == p and res.switches == 0 and res.passes == 1


def test_single_forced_move():
    side = make_side([set()], [0], 1)
    params = DeliveryParams(2, 0.5, 3.0, 5)
    ctx = _ctx([[1.0], [3.0]], make_cache(np.ones((1, 2)), 2), side, params)
    p = Partition((frozenset({0}), frozenset()), 2, 1)
    res = switch_phase(p, ctx)
    assert res.switches == 1 and res.partition.of(0) == 1
    assert is_nash_stable(res.partition, ctx)


def test_empty_network_is_stable():
    side = make_side([], [], 3)
    params = DeliveryParams(1, 0.5, 3.0, 5)
    ctx = _ctx(np.zeros((1, 0)), make_cache(np.ones((3, 1)), 1), side, params)
    assert is_nash_stable(Partition((frozenset(),), 1, 0), ctx)


@given(st.integers(0, 2**32 - 1), st.sampled_from(["greedy", "exact"]))
def test_switch_phase_reaches_nash_stability(seed, method):
    rng = np.random.default_rng(seed)
    _, caps, cache, side, params = random_instance(rng, max_tx=4, max_users=10, num_files=5)
    ctx = CoalitionContext(caps, cache, side, params, method)
    start = init_partition(side, cache, params, caps.shape[0], rng)
    res = switch_phase(start, ctx, record=True)
    assert is_nash_stable(res.partition, ctx)
    assert all(b > a for a, b in zip(res.trace, res.trace[1:]))
    assert res.switches == len(res.trace) - 1
    seen = set()
    for c in res.partition.coalitions:
        assert not seen & c
        seen |= c
