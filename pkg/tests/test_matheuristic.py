import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ccsp.brkga import BrkgaParams
from ccsp.core import Metric, Route, validate
from ccsp.matheuristic import (
    InfeasiblePoolError,
    PooledRoute,
    RoutePool,
    enumerate_small_routes,
    exact_ccsp,
    harvest_elite_routes,
    read_pool,
    solve_cover_packing,
    write_pool,
)
from ccsp.methods import SolveConfig, brkga_pipeline, matheuristic_pipeline
from ccsp.mip import HighsBackend

from util import brute_partition, brute_selection, brute_small_route_cost, make_instance, tiny_instance


def pooled(inst, nodes, serviced):
    return PooledRoute.from_route(Route(list(nodes), dict(serviced)), inst)


# ---------------------------------------------------------------- small routes


def test_single_demand_out_and_back():
    inst = make_instance([(0, 0), (3, 4), (9, 9)], [0, 2, 0], 5)
    routes = enumerate_small_routes(inst)
    assert len(routes) == 1
    assert routes[0].nodes == (0, 1, 0) and routes[0].cost == 10.0


def test_three_demands_give_seven_routes():
    inst = make_instance([(0, 0), (1, 0), (0, 1), (1, 1)], [0, 1, 1, 1], 3)
    routes = enumerate_small_routes(inst)
    assert len(routes) == 7
    assert sorted(len(r.covered) for r in routes) == [1, 1, 1, 2, 2, 2, 3]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_small_routes_match_exhaustive_oracle(seed):
    inst = tiny_instance(seed)
    routes = enumerate_small_routes(inst)
    dem = inst.demand_vertices
    expected = [
        S for k in (1, 2, 3) for S in itertools.combinations(dem, k)
        if sum(int(inst.demand[u]) for u in S) <= inst.capacity
    ]
    by_cover = {tuple(sorted(r.covered)): r for r in routes}
    assert len(routes) == len(by_cover) == len(expected)
    for S in expected:
        r = by_cover[tuple(sorted(S))]
        assert r.cost == pytest.approx(brute_small_route_cost(inst, S), abs=1e-9)
        assert r.is_feasible(inst)


def test_keep_all_keeps_at_least_the_minimum():
    inst = tiny_instance(6)
    best = enumerate_small_routes(inst)
    every = enumerate_small_routes(inst, keep_all=True)
    assert len(every) >= len(best)
    for r in best:
        same = [q.cost for q in every if q.covered == r.covered]
        assert min(same) == pytest.approx(r.cost)


# ---------------------------------------------------------------- pool


def test_pool_deduplicates_orientation():
    inst = make_instance([(0, 0), (1, 0), (0, 1)], [0, 1, 1], 5)
    pool = RoutePool()
    assert pool.add(pooled(inst, [0, 1, 2, 0], {1: 1, 2: 2}))
    assert not pool.add(pooled(inst, [0, 2, 1, 0], {1: 1, 2: 2}))
    assert len(pool) == 1


def test_harvest_rules():
    inst = tiny_instance(1)
    pool = RoutePool(limit=3)
    harvest_elite_routes([], pool, inst)
    assert len(pool) == 0
    small = [r.to_route() for r in enumerate_small_routes(inst)]
    harvest_elite_routes(small + small, pool, inst)
    assert len(pool) == 3
    harvest_elite_routes(small, pool, inst)
    assert len(pool) == 3
    big = RoutePool()
    harvest_elite_routes(small + small, big, inst)
    assert len(big) == len(small)
    # an overloaded route is not pooled
    # vertex 2 covers demands 2 and 5 (9 + 8 > Q = 9)
    assert inst.capacity == 9 and 5 in inst.covers[2]
    over = RoutePool()
    harvest_elite_routes([Route([0, 2, 0], {2: 2, 5: 2})], over, inst)
    assert len(over) == 0


def test_pool_file_round_trip():
    inst = tiny_instance(2)
    pool = RoutePool()
    pool.extend(enumerate_small_routes(inst))
    back = read_pool(write_pool(pool, inst.name), inst)
    assert back.routes == pool.routes
    with pytest.raises(ValueError, match="differs"):
        read_pool("99 | 1 2 1 | ", inst)


# ---------------------------------------------------------------- cover/packing


def test_one_covering_route_is_selected():
    inst = make_instance([(0, 0), (1, 0), (2, 0)], [0, 1, 1], 5)
    pool = [pooled(inst, [0, 1, 2, 0], {1: 1, 2: 2})]
    res = solve_cover_packing(pool, inst)
    assert res.selected == [0] and res.optimal


def test_cheaper_of_two_routes():
    inst = make_instance([(0, 0), (2.5, 0), (0, 3.5)], [0, 1, 0], 5, covers={2: (2, 1)})
    pool = [pooled(inst, [0, 1, 0], {1: 1}), pooled(inst, [0, 2, 0], {1: 2})]
    assert [p.cost for p in pool] == [5.0, 7.0]
    res = solve_cover_packing(pool, inst)
    assert res.objective == 5.0 and res.selected == [0]


def test_uncovered_demand_is_named():
    inst = make_instance([(0, 0), (1, 0), (2, 0)], [0, 1, 1], 5)
    with pytest.raises(InfeasiblePoolError, match=r"\[2\]"):
        solve_cover_packing([pooled(inst, [0, 1, 0], {1: 1})], inst)


def test_over_coverage_goes_to_lowest_index_route():
    inst = make_instance([(0, 0), (1, 0), (0, 1)], [0, 1, 1], 5, covers={1: (1, 2), 2: (2, 1)})
    pool = [pooled(inst, [0, 1, 0], {1: 1, 2: 1}), pooled(inst, [0, 2, 0], {1: 2, 2: 2})]
    # selecting both is legal but never optimal; force it through the assignment helper
    from ccsp.matheuristic import _solution_from_selection

    sol = _solution_from_selection(pool, [0, 1], inst)
    assert len(sol.routes) == 1 and validate(inst, sol) == []


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 12))
def test_cover_packing_matches_subset_enumeration(seed, size):
    inst = tiny_instance(seed)
    full = enumerate_small_routes(inst)
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(full), size=min(size, len(full)), replace=False)
    pool = [full[i] for i in sorted(pick)]
    expect = brute_selection(pool, inst)
    try:
        res = solve_cover_packing(pool, inst)
    except InfeasiblePoolError:
        assert math.isinf(expect)
        return
    assert res.objective == pytest.approx(expect, abs=1e-9)
    assert res.solution.cost <= res.objective + 1e-9
    assert validate(inst, res.solution) == []


@pytest.mark.parametrize("seed", range(5))
def test_highs_backend_agrees_with_builtin(seed):
    inst = tiny_instance(seed)
    pool = enumerate_small_routes(inst)
    outcomes = []
    for backend in (None, HighsBackend()):
        try:
            outcomes.append(solve_cover_packing(pool, inst, backend=backend).objective)
        except InfeasiblePoolError:
            # small routes alone may clash on a shared covering vertex
            outcomes.append(math.inf)
    assert outcomes[0] == pytest.approx(outcomes[1], abs=1e-6)


def test_incumbent_indices_are_accepted():
    inst = tiny_instance(3)
    pool = enumerate_small_routes(inst)
    assert brute_selection([r for r in pool if len(r.covered) == 1], inst) < math.inf
    singles = [i for i, r in enumerate(pool) if len(r.covered) == 1]
    res = solve_cover_packing(pool, inst)
    warm = solve_cover_packing(pool, inst, incumbent=singles)
    assert warm.objective == pytest.approx(res.objective)


# ---------------------------------------------------------------- exact oracle


def test_oracle_single_demand():
    inst = make_instance([(0, 0), (3, 4)], [0, 2], 5)
    sol = exact_ccsp(inst)
    assert sol.cost == 10.0 and len(sol.routes) == 1


def test_oracle_two_clusters_need_two_routes():
    coords = [(0, 0), (50, 0), (51, 1), (-50, 0), (-51, 1)]
    inst = make_instance(coords, [0, 3, 3, 3, 3], 6)
    sol = exact_ccsp(inst)
    assert len(sol.routes) == 2
    assert sol.cost == pytest.approx(brute_partition(inst))


@pytest.mark.parametrize("seed", [1, 3, 5, 7, 9, 11])
def test_oracle_matches_partition_enumeration(seed):
    inst = tiny_instance(seed, Metric.EXACT)
    sol = exact_ccsp(inst)
    assert validate(inst, sol) == []
    assert sol.cost == pytest.approx(brute_partition(inst), abs=1e-6)


def test_oracle_size_guard():
    inst = make_instance([(i, 0) for i in range(12)], [0] + [1] * 11, 20)
    with pytest.raises(ValueError, match="limited"):
        exact_ccsp(inst)


# ---------------------------------------------------------------- pipeline


@pytest.mark.parametrize("seed", range(3))
def test_matheuristic_never_worse_than_brkga(seed):
    inst = tiny_instance(20 + seed)
    cfg = SolveConfig(brkga=BrkgaParams(population_size=30, seed=seed, max_generations=10, max_seconds=None))
    best, _ = brkga_pipeline(inst, cfg)
    sol, res, pool, cover = matheuristic_pipeline(inst, cfg)
    assert validate(inst, sol) == []
    assert sol.cost <= best.cost + 1e-9
    assert sol.cost >= exact_ccsp(inst).cost - 1e-6
    assert all(r.is_feasible(inst) for r in pool)
