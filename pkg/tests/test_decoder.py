import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ccsp.core import Metric, Route, Solution, validate
from ccsp.decoder import best_fit, construct_routes, decode, insertion_cost, remove_redundant, sort_keys, Assignment
from ccsp.matheuristic import exact_ccsp

from util import best_fit_by_hand, brute_bin_packing, make_instance, tiny_instance


def bin_instance(demands, Q):
    """Demands on vertices 1..n, coordinates irrelevant for packing."""
    n = len(demands)
    coords = [(0, 0)] + [(i, 1) for i in range(1, n + 1)]
    return make_instance(coords, [0] + list(demands), Q)


# ---------------------------------------------------------------- key sort


def test_sort_keys():
    assert sort_keys([0.9, 0.1, 0.5], ["a", "b", "c"]) == ["b", "c", "a"]
    assert sort_keys([0.3, 0.3, 0.1], ["a", "b", "c"]) == ["c", "a", "b"]
    assert sort_keys([0.1, 0.2, 0.3], ["a", "b", "c"]) == ["a", "b", "c"]


# ---------------------------------------------------------------- Best-Fit


def test_best_fit_worked_example():
    inst = bin_instance([5, 4, 3, 2], 10)
    a = best_fit([1, 2, 3, 4], inst)
    assert a.vehicles == [[1, 2], [3, 4]] and a.loads == [9, 5]
    assert brute_bin_packing([5, 4, 3, 2], 10) == 2


def test_best_fit_edge_cases():
    assert best_fit([1], bin_instance([3], 10)).M == 1
    inst = bin_instance([10, 10, 10], 10)
    assert best_fit([1, 2, 3], inst).M == 3


def test_best_fit_prefers_fullest_then_lowest_index():
    # loads 6 and 6 after three items; a 3 goes to vehicle 0 (tie -> lowest index)
    inst = bin_instance([6, 6, 3, 4], 10)
    a = best_fit([1, 2, 3, 4], inst)
    assert a.vehicles == [[1, 3], [2, 4]]


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 20).flatmap(lambda Q: st.tuples(st.just(Q), st.lists(st.integers(1, Q), min_size=1, max_size=12))))
def test_best_fit_matches_hand_simulation(case):
    Q, demands = case
    inst = bin_instance(demands, Q)
    a = best_fit(list(range(1, len(demands) + 1)), inst)
    hand = best_fit_by_hand(demands, Q)
    assert a.vehicles == [[i + 1 for i in b] for b in hand]
    assert a.M <= 2 * brute_bin_packing(demands, Q)
    assert all(load <= Q for load in a.loads)


# ---------------------------------------------------------------- insertion


def test_insertion_into_empty_route():
    inst = make_instance([(0, 0), (3, 4)], [0, 1], 5)
    g, pos = insertion_cost(1, [0, 0], inst)
    assert g == 10.0 and pos == 0


def test_insertion_collinear_is_free():
    inst = make_instance([(0, 0), (4, 0), (2, 0)], [0, 1, 1], 5)
    g, _ = insertion_cost(2, [0, 1, 0], inst)
    assert g == pytest.approx(0.0, abs=1e-12)


def test_insertion_worked_example():
    inst = make_instance([(0, 0), (4, 0), (2, 1)], [0, 1, 1], 5)
    # both positions by hand: (0,1) and (1,0) give the same detour
    by_hand = [math.hypot(2, 1) + math.hypot(2, 1) - 4.0] * 2
    g, pos = insertion_cost(2, [0, 1, 0], inst)
    assert g == pytest.approx(min(by_hand)) == pytest.approx(2 * math.sqrt(5) - 4)
    assert pos == 0


# ---------------------------------------------------------------- construction


def test_single_self_covered_demand():
    inst = make_instance([(0, 0), (5, 0)], [0, 3], 5)
    sol = construct_routes(Assignment([[1]], [3]), inst)
    assert [r.nodes for r in sol.routes] == [[0, 1, 0]] and sol.routes[0].serviced == {1: 1}


@pytest.mark.parametrize("w_pos, expect", [((1, 0), 2), ((9, 0), 1)])
def test_cheaper_covering_vertex_is_chosen(w_pos, expect):
    # u = 1 at (6, 0) is covered by itself and by w = 2
    inst = make_instance([(0, 0), (6, 0), w_pos], [0, 3, 0], 5, covers={2: (2, 1)})
    sol = construct_routes(Assignment([[1]], [3]), inst)
    assert sol.routes[0].serviced == {1: expect}


def test_same_route_vertex_is_reused():
    # 3 covers 1 and 2; after inserting 3 for demand 1 the same vertex serves 2
    inst = make_instance([(0, 0), (10, 0), (10, 2), (9, 1)], [0, 2, 2, 0], 10, covers={3: (3, 1, 2)})
    sol = construct_routes(Assignment([[1, 2]], [4]), inst)
    assert sol.routes[0].nodes == [0, 3, 0]
    assert sol.routes[0].serviced == {1: 3, 2: 3}


# ---------------------------------------------------------------- redundancy removal


def test_idle_visit_is_removed():
    inst = make_instance([(0, 0), (5, 0), (5, 5)], [0, 3, 0], 5, covers={2: (2,)})
    # 2 has no demand of its own; kept only because the cover set must be
    # non-empty, so it just sits on the route
    sol = Solution.from_routes(inst, [Route([0, 1, 2, 0], {1: 1})])
    out = remove_redundant(sol, inst)
    assert out.routes[0].nodes == [0, 1, 0] and out.cost < sol.cost


def test_largest_saving_removed_first():
    # demand 1 (at the depot's doorstep) is covered by both 2 and 3;
    # dropping 3 saves more than dropping 2, and afterwards 2 is needed
    coords = [(0, 0), (0, 1), (4, 0), (4, 6)]
    inst = make_instance(coords, [0, 2, 0, 0], 5, covers={1: (1,), 2: (2, 1), 3: (3, 1)})
    sol = Solution.from_routes(inst, [Route([0, 2, 3, 0], {1: 2})])
    out = remove_redundant(sol, inst)
    assert out.routes[0].nodes == [0, 2, 0]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**6))
def test_redundancy_removal_properties(seed, kseed):
    inst = tiny_instance(seed)
    keys = np.random.default_rng(kseed).random(len(inst.demand_vertices))
    order = sort_keys(keys, inst.demand_vertices)
    built = construct_routes(best_fit(order, inst), inst)
    assert validate(inst, built) == []
    cleaned = remove_redundant(built, inst)
    assert validate(inst, cleaned) == []
    assert cleaned.cost <= built.cost + 1e-9
    again = remove_redundant(cleaned, inst)
    assert [r.nodes for r in again.routes] == [r.nodes for r in cleaned.routes]


# ---------------------------------------------------------------- full decode


def test_decode_is_pure():
    inst = tiny_instance(7)
    keys = np.random.default_rng(1).random(len(inst.demand_vertices))
    a, b = decode(keys, inst), decode(keys.copy(), inst)
    assert [r.nodes for r in a.routes] == [r.nodes for r in b.routes] and a.cost == b.cost


def test_single_demand_ignores_keys():
    inst = make_instance([(0, 0), (3, 0), (5, 5)], [0, 0, 4], 5, covers={1: (1, 2), 2: (2,)})
    a, b = decode([0.1], inst), decode([0.9], inst)
    assert [r.nodes for r in a.routes] == [r.nodes for r in b.routes]


@pytest.mark.parametrize("seed", range(4))
def test_decode_never_beats_oracle(seed):
    inst = tiny_instance(seed)
    opt = exact_ccsp(inst).cost
    rng = np.random.default_rng(seed)
    for _ in range(100):
        sol = decode(rng.random(len(inst.demand_vertices)), inst)
        assert validate(inst, sol) == []
        assert sol.cost >= opt - 1e-6


def test_three_vehicle_instance_decodes_clean():
    from ccsp.instance_io import random_ccsp

    inst = random_ccsp(np.random.default_rng(11), 9, 6, 3, 3, Metric.EXACT)
    rng = np.random.default_rng(0)
    for _ in range(1000):
        assert validate(inst, decode(rng.random(len(inst.demand_vertices)), inst)) == []
