import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fogclnc.content import CacheMatrix
from fogclnc.idnc import (
    BRUTE_FORCE_LIMIT,
    ConflictGraph,
    DeliveryParams,
    Schedule,
    Transmission,
    Vertex,
    adjacent,
    brute_force_mwc,
    build_graph,
    exact_mwc,
    graph_to_dot,
    greedy_mwc,
    schedule_from_clique,
    solve_mwc,
    sum_rate,
    validate_schedule,
    weight_of,
    xor_decode,
)

from .conftest import make_cache, make_side
from .oracles import decodes, random_instance, schedule_space_optimum

PARAMS = DeliveryParams(num_faps=1, rate_threshold=0.5, fronthaul_se=3.0, fetch_limit=5)


def _graph(weights, adjacency, transmitters=None):
    n = len(weights)
    ts = transmitters or [0] * n
    vs = [Vertex(ts[i], i, 0, 1.0, float(w)) for i, w in enumerate(weights)]
    return ConflictGraph(vs, np.asarray(adjacency, dtype=bool))


def test_single_user_single_vertex():
    side = make_side([set()], [0], 2)
    g = build_graph([{0}], make_cache([[1], [0]], 1), side, np.array([[2.0]]), PARAMS)
    assert [(v.user, v.rate, v.weight) for v in g.vertices] == [(0, 2.0, 2.0)]


def test_capacity_below_threshold_gives_no_vertex():
    side = make_side([set()], [0], 2)
    g = build_graph([{0}], make_cache([[1], [0]], 1), side, np.array([[0.4]]), PARAMS)
    assert len(g) == 0


def test_candidate_rates_from_coalition():
    side = make_side([{1}, {0}], [0, 1], 2)
    g = build_graph([{0, 1}], make_cache(np.ones((2, 1)), 1), side, np.array([[1.0, 2.0]]), PARAMS)
    rates = {(v.user, v.rate) for v in g.vertices}
    assert rates == {(0, 1.0), (1, 1.0), (1, 2.0)}


def test_uncached_file_at_d2d_has_no_vertex():
    params = DeliveryParams(1, 0.5, 3.0, 5, (frozenset({0}),))
    side = make_side([set()], [0], 2)
    cache = make_cache([[1, 0], [1, 1]], 1)
    g = build_graph([set(), {0}], cache, side, np.array([[2.0], [2.0]]), params)
    assert len(g) == 0


def test_d2d_coverage_filter():
    params = DeliveryParams(1, 0.5, 3.0, 5, (frozenset(),))
    side = make_side([set()], [0], 1)
    g = build_graph([set(), {0}], make_cache([[1, 1]], 1), side, np.array([[2.0], [2.0]]), params)
    assert len(g) == 0


def test_fetched_vertex_weight():
    side = make_side([set()], [0], 1)
    g = build_graph([{0}], make_cache([[0]], 1), side, np.array([[5.0]]), PARAMS)
    (v,) = g.vertices
    assert v.fetched and v.weight == 3.0


@pytest.mark.parametrize(
    "rate, cached, w", [(2.0, True, 2.0), (5.0, False, 3.0), (1.0, False, 1.0)]
)
def test_weight_of(rate, cached, w):
    assert weight_of(rate, cached, 30e6, 10e6) == w


def test_adjacency_cases():
    side = make_side([{1}, {0}, set(), {0}], [0, 1, 0, 1], 2)
    v = lambda t, u, r=1.0: Vertex(t, u, side.wants[u], r, r)  # noqa: E731
    assert adjacent(v(0, 0), v(0, 2), side)  # multicast of one file
    assert not adjacent(v(0, 0, 1.0), v(0, 1, 2.0), side)
    assert adjacent(v(0, 0), v(0, 1), side)  # mutual side information
    assert not adjacent(v(0, 2), v(0, 3), side)  # user 2 lacks file 1
    assert not adjacent(v(0, 0, 1.0), v(0, 0, 1.0), side)
    assert adjacent(v(0, 0), v(1, 0), side)


def test_one_sided_side_information_not_adjacent():
    # f0 in H_u1 but f1 not in H_u0
    side = make_side([set(), {0}], [0, 1], 2)
    a, b = Vertex(0, 0, 0, 1.0, 1.0), Vertex(0, 1, 1, 1.0, 1.0)
    assert not adjacent(a, b, side)
    assert decodes({0, 1}, side.has[1], 1) and not decodes({0, 1}, side.has[0], 0)


@given(st.integers(0, 2**32 - 1))
def test_adjacency_structure(seed):
    coalitions, caps, cache, side, params = random_instance(np.random.default_rng(seed))
    g = build_graph(coalitions, cache, side, caps, params)
    a = g.adjacency
    assert np.array_equal(a, a.T)
    assert not np.diag(a).any()
    for i, vi in enumerate(g.vertices):
        for j, vj in enumerate(g.vertices):
            if i != j:
                assert a[i, j] == adjacent(vi, vj, side)
                if vi.transmitter != vj.transmitter:
                    assert a[i, j]
        assert vi.rate <= caps[vi.transmitter, vi.user] and vi.rate >= params.rate_threshold


def test_greedy_complete_graph():
    g = _graph([3, 2, 1], np.ones((3, 3)) - np.eye(3))
    assert greedy_mwc(g) == [0, 1, 2] and g.weight_of(greedy_mwc(g)) == 6


def test_greedy_isolated_vertices():
    g = _graph([5, 4], np.zeros((2, 2)))
    assert greedy_mwc(g) == [0]


def test_greedy_ties_lowest_id():
    g = _graph([4, 4], np.zeros((2, 2)))
    assert greedy_mwc(g) == [0]


def test_greedy_suboptimal_instance():
    # heavy hub 0 adjacent only to 1; 2,3,4 form a triangle of weight 9
    adj = np.zeros((5, 5), bool)
    for i, j in [(0, 1), (2, 3), (2, 4), (3, 4), (1, 2)]:
        adj[i, j] = adj[j, i] = True
    g = _graph([5, 1, 3, 3, 3], adj)
    greedy, best = greedy_mwc(g), brute_force_mwc(g)
    assert g.weight_of(greedy) == 6 and g.weight_of(best) == 9
    assert g.is_clique(greedy) and g.is_clique(best)


def test_empty_graph():
    g = _graph([], np.zeros((0, 0)))
    assert greedy_mwc(g) == [] and brute_force_mwc(g) == [] and exact_mwc(g) == []


def test_brute_force_guard():
    n = BRUTE_FORCE_LIMIT + 1
    with pytest.raises(ValueError):
        brute_force_mwc(_graph([1] * n, np.zeros((n, n))))


def test_brute_force_lexicographic_tie_break():
    g = _graph([2, 2, 2], np.zeros((3, 3)))
    assert brute_force_mwc(g) == [0]


def test_solve_mwc_unknown_method():
    with pytest.raises(ValueError):
        solve_mwc(_graph([1], np.zeros((1, 1))), "psychic")


def test_fetch_budget_respected_in_search():
    side = make_side([{1}, {0}], [0, 1], 2)
    params = DeliveryParams(1, 0.5, 10.0, 1)
    g = build_graph([{0, 1}], make_cache(np.zeros((2, 1)), 1), side, np.array([[2.0, 2.0]]), params)
    for solver in (greedy_mwc, brute_force_mwc, exact_mwc):
        clique = solver(g)
        assert g.within_budget(clique)
        assert len(clique) == 1


@given(st.integers(0, 2**32 - 1))
def test_graph_optimum_matches_schedule_space(seed):
    coalitions, caps, cache, side, params = random_instance(np.random.default_rng(seed))
    g = build_graph(coalitions, cache, side, caps, params)
    if len(g) > BRUTE_FORCE_LIMIT:
        return
    oracle = schedule_space_optimum(coalitions, caps, cache, side, params)
    best = brute_force_mwc(g)
    assert g.weight_of(best) == pytest.approx(oracle, abs=1e-9)
    assert g.weight_of(exact_mwc(g)) == pytest.approx(oracle, abs=1e-9)
    assert g.weight_of(greedy_mwc(g)) <= oracle + 1e-9


@given(st.integers(0, 2**32 - 1), st.sampled_from(["greedy", "exact"]))
def test_schedules_from_cliques_are_valid(seed, method):
    coalitions, caps, cache, side, params = random_instance(np.random.default_rng(seed), max_users=6)
    g = build_graph(coalitions, cache, side, caps, params)
    clique = solve_mwc(g, method)
    assert g.is_clique(clique)
    sched = schedule_from_clique(g, clique, cache, side)
    assert validate_schedule(sched, cache, side, caps, params) == []
    assert sched.weight(params.fronthaul_se) == pytest.approx(g.weight_of(clique), rel=1e-12)
    assert sum_rate(sched, params.fronthaul_se * 10e6, 10e6) == pytest.approx(g.weight_of(clique) * 10e6, rel=1e-12)


@pytest.mark.parametrize(
    "combo, has, out", [({0, 1}, {1}, 0), ({0, 1}, set(), None), ({0, 1}, {0, 1}, None), ({2}, set(), 2)]
)
def test_xor_decode(combo, has, out):
    assert xor_decode(combo, has) == out


def test_sum_rate_fronthaul_cap():
    sched = Schedule((Transmission(0, 5.0, ((0, 0), (1, 1)), frozenset({1})),))
    assert sum_rate(sched, 30e6, 10e6) == 50e6 + 30e6


def test_validator_flags_problems():
    side = make_side([set(), set()], [0, 1], 2)
    cache = CacheMatrix(np.array([[True, True], [False, False]]), 1)
    caps = np.array([[2.0, 2.0], [2.0, 2.0]])
    params = DeliveryParams(1, 0.5, 3.0, 5, (frozenset({0}),))
    bad = Schedule(
        (
            Transmission(0, 3.0, ((0, 0), (1, 1)), frozenset({1})),
            Transmission(1, 0.2, ((1, 1),), frozenset({1})),
        )
    )
    problems = " | ".join(validate_schedule(bad, cache, side, caps, params))
    for fragment in ("exceeds capacity", "cannot decode", "targeted twice", "below threshold", "cannot fetch", "outside coverage"):
        assert fragment in problems


def test_graph_to_dot():
    g = _graph([1, 2], np.array([[0, 1], [1, 0]]))
    dot = graph_to_dot(g)
    assert dot.startswith("graph idnc {") and "v0 -- v1;" in dot
