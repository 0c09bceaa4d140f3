import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ccsp.core import Metric, Route, Solution, route_cost, validate
from ccsp.decoder import decode
from ccsp.instance_io import random_ccsp
from ccsp.local_search import ALL_MOVES, MoveSet, improve_route, improve_solution

from util import brute_tour, make_instance, tiny_instance


def test_crossed_square_is_uncrossed():
    inst = make_instance([(0, 0), (1, 1), (1, 0), (0, 1)], [0, 1, 1, 1], 5)
    r = Route([0, 1, 2, 3, 0], {1: 1, 2: 2, 3: 3})
    assert route_cost(inst, r) == pytest.approx(2 + 2 * math.sqrt(2))
    assert brute_tour(inst, [1, 2, 3]) == pytest.approx(4.0)
    out = improve_route(r, inst)
    assert route_cost(inst, out) == pytest.approx(4.0)
    assert out.serviced == r.serviced and out.nodes[0] == out.nodes[-1] == 0


def test_triangle_and_empty_routes_unchanged():
    inst = make_instance([(0, 0), (3, 0), (0, 4)], [0, 1, 1], 5)
    tri = Route([0, 1, 2, 0], {1: 1, 2: 2})
    assert improve_route(tri, inst).nodes == tri.nodes
    assert improve_route(Route([0, 0]), inst).nodes == [0, 0]
    empty = Solution([], 0.0)
    assert improve_solution(empty, inst).routes == []


def test_move_set_parsing():
    assert MoveSet.parse("all").moves == frozenset(ALL_MOVES)
    assert MoveSet.parse("two-opt, or-opt-1").moves == {"two-opt", "or-opt-1"}
    with pytest.raises(ValueError):
        MoveSet.parse("lin-kernighan")
    with pytest.raises(ValueError):
        MoveSet(frozenset())


def random_route_instance(seed, k):
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0, 100, size=(k + 1, 2))
    inst = make_instance(coords, [0] + [1] * k, k)
    perm = [int(v) for v in rng.permutation(np.arange(1, k + 1))]
    return inst, Route([0] + perm + [0], {v: v for v in perm})


def two_opt_clean(inst, nodes):
    d = inst.dist
    n = len(nodes)
    for i in range(n - 3):
        for j in range(i + 2, n - 1):
            a, b, c, e = nodes[i], nodes[i + 1], nodes[j], nodes[j + 1]
            if d[a, c] + d[b, e] < d[a, b] + d[c, e] - 1e-9:
                return False
    return True


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(3, 9), st.sets(st.sampled_from(ALL_MOVES), min_size=1))
def test_route_contract(seed, k, moves):
    inst, r = random_route_instance(seed, k)
    ms = MoveSet(frozenset(moves))
    out = improve_route(r, inst, ms)
    assert sorted(out.visits) == sorted(r.visits) and out.serviced == r.serviced
    assert out.nodes[0] == out.nodes[-1] == 0
    assert route_cost(inst, out) <= route_cost(inst, r) + 1e-9
    assert improve_route(out, inst, ms).nodes == out.nodes
    if "two-opt" in moves:
        assert two_opt_clean(inst, out.nodes)


def test_matches_brute_force_tsp_on_small_routes():
    gaps = []
    for seed in range(40):
        k = 4 + seed % 5  # 4..8 visits
        inst, r = random_route_instance(seed, k)
        out = improve_route(r, inst)
        opt = brute_tour(inst, r.visits)
        gaps.append((route_cost(inst, out) - opt) / opt)
    assert min(gaps) >= -1e-9
    assert float(np.median(gaps)) <= 0.02


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_solution_cost_never_increases(seed):
    inst = random_ccsp(np.random.default_rng(seed), 9, 6, 3, 2, Metric.EXACT)
    sol = decode(np.random.default_rng(seed + 1).random(6), inst)
    out = improve_solution(sol, inst)
    assert out.cost <= sol.cost + 1e-9
    assert validate(inst, out) == []
