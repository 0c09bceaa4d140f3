import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ccsp.core import (
    CcspInstance,
    InfeasibleInstanceError,
    MdctvrpInstance,
    MdctvrpSolution,
    Metric,
    Route,
    Solution,
    ViolationKind,
    edge_cost,
    mdctvrp_cost,
    route_cost,
    validate,
    validate_mdctvrp,
)
from ccsp.decoder import decode

from util import make_instance, tiny_instance

coord = st.tuples(st.integers(-50, 50), st.integers(-50, 50))


def kinds(violations):
    return {v.kind for v in violations}


# ---------------------------------------------------------------- costs


def test_edge_cost_exact_345():
    inst = make_instance([(0, 0), (3, 4)], [0, 1], 5)
    assert edge_cost(inst, 0, 1) == 5.0


def test_edge_cost_rounded_diagonal():
    inst = make_instance([(0, 0), (1, 1)], [0, 1], 5, metric=Metric.ROUNDED)
    assert edge_cost(inst, 0, 1) == 1


def test_edge_cost_rounds_half_up():
    inst = make_instance([(0, 0), (0.5, 0), (2.5, 0)], [0, 1, 0], 5, metric=Metric.ROUNDED)
    assert edge_cost(inst, 0, 1) == 1 and edge_cost(inst, 0, 2) == 3


def test_edge_cost_identity_and_unknown_vertex():
    inst = make_instance([(0, 0), (3, 4)], [0, 1], 5)
    assert edge_cost(inst, 1, 1) == 0
    with pytest.raises(KeyError):
        edge_cost(inst, 0, 7)


def test_route_costs():
    inst = make_instance([(0, 0), (3, 4), (0, 3), (4, 3)], [0, 1, 1, 1], 5)
    assert route_cost(inst, Route([0, 0])) == 0
    assert route_cost(inst, Route([0, 1, 0])) == 10.0
    assert route_cost(inst, Route([0, 2, 3, 0])) == 12.0


@settings(max_examples=50, deadline=None)
@given(st.lists(coord, min_size=3, max_size=6, unique=True), st.sampled_from(list(Metric)))
def test_symmetry_and_triangle(pts, metric):
    inst = make_instance(pts, [0] + [1] * (len(pts) - 1), 10, metric=metric)
    n = inst.n
    slack = 1e-9 if metric is Metric.EXACT else 1.0
    for u in range(n):
        for v in range(n):
            assert edge_cost(inst, u, v) == edge_cost(inst, v, u)
            for w in range(n):
                assert edge_cost(inst, u, w) <= edge_cost(inst, u, v) + edge_cost(inst, v, w) + slack


# ---------------------------------------------------------------- instance invariants


def test_covered_by_is_dual_of_covers():
    inst = tiny_instance(3)
    rebuilt = [set() for _ in range(inst.n)]
    for v, dv in enumerate(inst.covers):
        for u in dv:
            rebuilt[u].add(v)
    assert [set(c) for c in inst.covered_by] == rebuilt
    for v in inst.customers:
        assert v in inst.covers[v] and v in inst.covered_by[v]


def test_instance_rejects_bad_input():
    with pytest.raises(ValueError, match="depot"):
        make_instance([(0, 0), (1, 0)], [1, 1], 5)
    with pytest.raises(InfeasibleInstanceError):
        make_instance([(0, 0), (1, 0)], [0, 6], 5)
    with pytest.raises(ValueError, match="cover itself"):
        make_instance([(0, 0), (1, 0), (2, 0)], [0, 1, 1], 5, covers={1: (2,)})
    with pytest.raises(ValueError, match="invalid vertex"):
        make_instance([(0, 0), (1, 0)], [0, 1], 5, covers={1: (1, 0)})


def test_demand_vertices_exclude_depot():
    inst = make_instance([(0, 0), (1, 0), (2, 0)], [0, 0, 3], 5)
    assert inst.demand_vertices == (2,)
    assert inst.customers == (1, 2)


# ---------------------------------------------------------------- validate


@pytest.fixture
def line():
    # depot at 0; 1 covers 2; demands on 1 and 2
    return make_instance([(0, 0), (1, 0), (2, 0), (3, 0)], [0, 4, 4, 3], 8, covers={1: (1, 2), 2: (2,), 3: (3,)})


def test_feasible_solution_is_clean(line):
    sol = Solution.from_routes(line, [Route([0, 1, 0], {1: 1, 2: 1}), Route([0, 3, 0], {3: 3})])
    assert validate(line, sol) == []


def test_unserviced_demand(line):
    sol = Solution.from_routes(line, [Route([0, 1, 0], {1: 1, 2: 1})])
    assert kinds(validate(line, sol)) == {ViolationKind.COVERAGE}


def test_double_service(line):
    sol = Solution.from_routes(line, [Route([0, 1, 0], {1: 1, 2: 1}), Route([0, 2, 3, 0], {2: 2, 3: 3})])
    assert ViolationKind.COVERAGE in kinds(validate(line, sol))


def test_capacity_violation(line):
    sol = Solution.from_routes(line, [Route([0, 1, 3, 0], {1: 1, 2: 1, 3: 3})])
    found = validate(line, sol)
    assert kinds(found) == {ViolationKind.CAPACITY}
    assert "load 11" in str(found[0])


def test_duplicate_visit(line):
    sol = Solution.from_routes(line, [Route([0, 1, 0], {1: 1, 2: 1}), Route([0, 1, 3, 0], {3: 3})])
    assert kinds(validate(line, sol)) == {ViolationKind.DUPLICATE_VISIT}


def test_not_a_cycle(line):
    sol = Solution.from_routes(line, [Route([1, 0, 1], {}), Route([0, 1, 3, 0], {1: 1, 2: 1, 3: 3})])
    assert ViolationKind.NOT_A_CYCLE in kinds(validate(line, sol))
    sol = Solution.from_routes(line, [Route([0, 1, 3, 1, 0], {1: 1, 2: 1})])
    assert ViolationKind.NOT_A_CYCLE in kinds(validate(line, sol))


def test_service_outside_cover(line):
    # 3 does not cover 2; 2 is serviced from an unvisited vertex in the second case
    sol = Solution.from_routes(line, [Route([0, 1, 0], {1: 1}), Route([0, 3, 0], {2: 3, 3: 3})])
    assert kinds(validate(line, sol)) == {ViolationKind.SERVICE_OUTSIDE_COVER}
    sol = Solution.from_routes(line, [Route([0, 3, 0], {1: 1, 2: 1, 3: 3})])
    assert ViolationKind.SERVICE_OUTSIDE_COVER in kinds(validate(line, sol))


def test_cost_mismatch(line):
    sol = Solution([Route([0, 1, 0], {1: 1, 2: 1}), Route([0, 3, 0], {3: 3})], 7.5)
    assert kinds(validate(line, sol)) == {ViolationKind.COST_MISMATCH}


def test_fleet_check_only_when_asked(line):
    sol = Solution.from_routes(line, [Route([0, 1, 0], {1: 1, 2: 1}), Route([0, 3, 0], {3: 3})])
    assert validate(line, sol) == []
    assert kinds(validate(line, sol, max_fleet=1)) == {ViolationKind.FLEET}


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.lists(st.floats(0, 1, exclude_max=True), min_size=4, max_size=4))
def test_decoded_solutions_validate(seed, keys):
    inst = tiny_instance(seed)
    k = np.resize(np.asarray(keys), len(inst.demand_vertices))
    assert validate(inst, decode(k, inst)) == []


# ---------------------------------------------------------------- MDCTVRP


def two_depot_toy():
    return MdctvrpInstance(
        "toy",
        [(0, 0), (10, 0)],
        [(2, 1), (8, 1), (3, 3)],
        [3, 4, 2],
        10,
        20,
        (1, 1),
        ((0,), (1,), (2, 0)),
        {(2, 0): 1.5},
    )


def test_mdctvrp_validation():
    inst = two_depot_toy()
    routes = [[0, 2, 0], [1, 3, 1]]
    serviced = {0: 0, 1: 1, 2: 0}
    sol = MdctvrpSolution(routes, serviced, mdctvrp_cost(inst, routes, serviced))
    assert validate_mdctvrp(inst, sol) == []
    assert math.isclose(sol.cost, 2 * math.hypot(2, 1) * 2 + 1.5)
    bad = MdctvrpSolution([[0, 2, 3, 1]], {0: 0, 1: 1, 2: 0}, 0.0)
    assert ViolationKind.NOT_A_CYCLE in kinds(validate_mdctvrp(inst, bad))


def test_mdctvrp_rejects_missing_allocation():
    with pytest.raises(ValueError, match="allocation"):
        MdctvrpInstance("x", [(0, 0)], [(1, 0), (2, 0)], [1, 1], 5, 5, (1,), ((0, 1), (1,)), {})
