"""CCSP and MDCTVRP integer models, lazy-cut separation and point codecs.

Variable names use 1-based vertex ids: ``x_i_j`` (i < j) edge uses,
``y_v`` visits, ``z_u_v`` service of u through v, ``K`` the fleet size.
The MDCTVRP model labels nodes ``d<k>``/``c<i>``, e.g. ``x_d1_c3``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ..core import CcspInstance, MdctvrpInstance, MdctvrpSolution, Route, Solution, mdctvrp_cost
from .model import Constraint, MipModel

INT_TOL = 1e-6
Point = Dict[str, float]


def xname(i: int, j: int) -> str:
    i, j = min(i, j), max(i, j)
    return f"x_{i + 1}_{j + 1}"


def zname(u: int, v: int) -> str:
    return f"z_{u + 1}_{v + 1}"


def yname(v: int) -> str:
    return f"y_{v + 1}"


def _edges(instance: CcspInstance):
    return list(itertools.combinations(range(instance.n), 2))


def _incident(instance: CcspInstance, v: int) -> Dict[str, float]:
    return {xname(v, w): 1.0 for w in range(instance.n) if w != v}


def _base_ccsp(instance: CcspInstance, name: str) -> MipModel:
    m = MipModel(name)
    depot = instance.depot
    for i, j in _edges(instance):
        c = instance.cost(i, j)
        if depot in (i, j):
            m.add_var(xname(i, j), "integer", 0, 2, obj=c, symbol="x_e")
        else:
            m.add_var(xname(i, j), "binary", obj=c, symbol="x_e")
    return m


def _add_service(m: MipModel, instance: CcspInstance):
    for u in instance.demand_vertices:
        for v in instance.covered_by[u]:
            m.add_var(zname(u, v), "binary", symbol="z_uv")
    m.add_var("K", "integer", 0, len(instance.customers), symbol="K")


def _add_fleet_and_assignment(m: MipModel, instance: CcspInstance):
    deg0 = _incident(instance, instance.depot)
    deg0["K"] = -2.0
    m.add_constraint("depot_degree", deg0, "=", 0.0)
    for u in instance.demand_vertices:
        m.add_constraint(f"assign_{u + 1}", {zname(u, v): 1.0 for v in instance.covered_by[u]}, "=", 1.0)


def _set_priorities(m: MipModel):
    # fleet size, then visits, then services, then edges
    rank = {"K": 3, "y": 2, "z": 1, "x": 0}
    for name in m.variables:
        m.priorities[name] = rank[name[0]]


def build_ccsp1(instance: CcspInstance) -> MipModel:
    """Edge/visit/service model; the capacity-connectivity family is left out
    and separated lazily by :func:`separate_ccsp_capacity`."""
    m = _base_ccsp(instance, f"{instance.name}-ccsp1")
    for v in instance.customers:
        m.add_var(yname(v), "binary", symbol="y_v")
    _add_service(m, instance)
    _set_priorities(m)
    _add_fleet_and_assignment(m, instance)
    for v in instance.customers:
        row = _incident(instance, v)
        row[yname(v)] = -2.0
        m.add_constraint(f"degree_{v + 1}", row, "=", 0.0)
    for u in instance.demand_vertices:
        m.add_constraint(f"cover_{u + 1}", {yname(v): 1.0 for v in instance.covered_by[u]}, ">=", 1.0)
        for v in instance.covered_by[u]:
            m.add_constraint(f"link_{u + 1}_{v + 1}", {zname(u, v): 1.0, yname(v): -1.0}, "<=", 0.0)
    return m


def build_ccsp2(instance: CcspInstance) -> MipModel:
    """Visit variables substituted out: a vertex has degree 2 exactly when it
    services some demand, and 0 otherwise."""
    m = _base_ccsp(instance, f"{instance.name}-ccsp2")
    _add_service(m, instance)
    _set_priorities(m)
    _add_fleet_and_assignment(m, instance)
    serves = {v: [u for u in instance.demand_vertices if v in instance.covered_by[u]] for v in instance.customers}
    for v in instance.customers:
        for u in serves[v]:
            row = _incident(instance, v)
            row[zname(u, v)] = -2.0
            m.add_constraint(f"visit_{v + 1}_{u + 1}", row, ">=", 0.0)
    for v in instance.customers:
        row = _incident(instance, v)
        for u in serves[v]:
            row[zname(u, v)] = -2.0
        m.add_constraint(f"idle_{v + 1}", row, "<=", 0.0)
    for v in instance.customers:
        m.add_constraint(f"maxdeg_{v + 1}", _incident(instance, v), "<=", 2.0)
    return m


# ---------------------------------------------------------------------------
# CCSP points and capacity-connectivity separation
# ---------------------------------------------------------------------------


def _check_integral(values, what):
    for k, v in values.items():
        if abs(v - round(v)) > INT_TOL:
            raise ValueError(f"separation needs an integral point; {what} {k} = {v}")


def ccsp_point(values: Point, instance: CcspInstance):
    """Split a model assignment into edge values {(i, j): x} and service values {(u, v): z}."""
    x = {(i, j): float(values.get(xname(i, j), 0.0)) for i, j in _edges(instance)}
    z = {(u, v): float(values.get(zname(u, v), 0.0)) for u in instance.demand_vertices for v in instance.covered_by[u]}
    return x, z


def capacity_row(S, instance: CcspInstance) -> Dict[str, float]:
    """Coefficients of cut(S) - (2/Q) * (demand serviced from inside S) >= 0."""
    S = set(S)
    row = {}
    for i, j in _edges(instance):
        if (i in S) != (j in S):
            row[xname(i, j)] = 1.0
    scale = 2.0 / instance.capacity
    for u in instance.demand_vertices:
        for v in instance.covered_by[u]:
            if v in S:
                row[zname(u, v)] = -scale * float(instance.demand[u])
    return row


def separate_ccsp_capacity(x: Dict[Tuple[int, int], float], z: Dict[Tuple[int, int], float], instance: CcspInstance) -> List[Constraint]:
    """Violated capacity-connectivity rows for an integral point.

    Each connected component S of the support graph restricted to non-depot
    vertices is tested: edges crossing S must carry at least 2/Q times the
    demand serviced from S.
    """
    _check_integral(x, "edge")
    _check_integral(z, "service")
    verts = list(instance.customers)
    pos = {v: k for k, v in enumerate(verts)}
    rows, cols = [], []
    for (i, j), val in x.items():
        if val > 0.5 and i in pos and j in pos:
            rows.append(pos[i])
            cols.append(pos[j])
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(verts), len(verts)))
    n_comp, label = connected_components(graph, directed=False)
    cuts = []
    for c in range(n_comp):
        S = {verts[k] for k in np.flatnonzero(label == c)}
        lhs = sum(val for (i, j), val in x.items() if (i in S) != (j in S))
        served = sum(float(instance.demand[u]) * val for (u, v), val in z.items() if v in S)
        rhs = 2.0 * served / instance.capacity
        if lhs < rhs - 1e-9:
            members = "_".join(str(v + 1) for v in sorted(S))
            cuts.append(Constraint(f"capacity_{members}", capacity_row(S, instance), ">=", 0.0))
    return cuts


def ccsp_separator(instance: CcspInstance) -> Callable[[Point, MipModel], List[Constraint]]:
    def separate(values: Point, model: MipModel):
        x, z = ccsp_point(values, instance)
        return separate_ccsp_capacity(x, z, instance)

    return separate


def encode_ccsp(solution: Solution, instance: CcspInstance) -> Point:
    """Model assignment for a CCSP solution (works for both formulations; y is included)."""
    values: Point = {xname(i, j): 0.0 for i, j in _edges(instance)}
    for r in solution.routes:
        for a, b in zip(r.nodes, r.nodes[1:]):
            values[xname(a, b)] += 1.0
    visited = {v for r in solution.routes for v in r.visits}
    for v in instance.customers:
        values[yname(v)] = 1.0 if v in visited else 0.0
    for u in instance.demand_vertices:
        for v in instance.covered_by[u]:
            values[zname(u, v)] = 0.0
    for r in solution.routes:
        for u, v in r.serviced.items():
            values[zname(u, v)] = 1.0
    values["K"] = float(solution.K)
    return values


def decode_ccsp(values: Point, instance: CcspInstance) -> Solution:
    """Routes of an integral, cut-feasible model point."""
    x, z = ccsp_point(values, instance)
    depot = instance.depot
    left = {e: int(round(val)) for e, val in x.items() if val > 0.5}

    def take(a, b):
        e = (min(a, b), max(a, b))
        if left.get(e, 0) <= 0:
            return False
        left[e] -= 1
        return True

    def neighbours(v):
        return [w for w in range(instance.n) if w != v and left.get((min(v, w), max(v, w)), 0) > 0]

    routes: List[Route] = []
    while neighbours(depot):
        cur = neighbours(depot)[0]
        take(depot, cur)
        nodes = [depot]
        while cur != depot:
            nodes.append(cur)
            nxt = neighbours(cur)
            if not nxt or len(nodes) > instance.n:
                raise ValueError("point does not decompose into depot cycles")
            # leave through a non-depot edge when one remains
            w = next((w for w in nxt if w != depot), depot)
            take(cur, w)
            cur = w
        nodes.append(depot)
        routes.append(Route(nodes, {}))
    where = {v: k for k, r in enumerate(routes) for v in r.visits}
    for (u, v), val in z.items():
        if val > 0.5:
            if v not in where:
                raise ValueError(f"demand {u} serviced through unvisited vertex {v}")
            routes[where[v]].serviced[u] = v
    return Solution.from_routes(instance, routes)


# ---------------------------------------------------------------------------
# MDCTVRP
# ---------------------------------------------------------------------------


def _arcs(instance: MdctvrpInstance):
    n = instance.n_depots + instance.n_customers
    return [(i, j) for i in range(n) for j in range(n) if i != j and not (instance.is_depot(i) and instance.is_depot(j))]


def arc_name(instance: MdctvrpInstance, kind: str, i: int, j: int) -> str:
    return f"{kind}_{instance.label(i)}_{instance.label(j)}"


def build_mdctvrp(instance: MdctvrpInstance) -> MipModel:
    """Directed two-index model with load-flow variables; the depot-to-depot
    path family is left out and separated lazily by :func:`separate_depot_paths`.
    Depot-to-depot arcs are not created (they would model empty trips)."""
    m = MipModel(f"{instance.name}-mdctvrp")
    nd, nc = instance.n_depots, instance.n_customers
    arcs = _arcs(instance)
    node = instance.node
    lab = instance.label
    Q = instance.capacity
    dem = instance.demand

    def dnode(i):  # demand of a node; depots carry none
        return 0 if instance.is_depot(i) else int(dem[i - nd])

    for i, j in arcs:
        m.add_var(arc_name(instance, "x", i, j), "binary", obj=instance.dist[i, j], symbol="x_ij")
    for c in range(nc):
        m.add_var(f"y_{lab(node(c))}", "binary", symbol="y_v")
    for u in range(nc):
        for v in instance.covered_by[u]:
            m.add_var(f"z_{lab(node(u))}_{lab(node(v))}", "binary", obj=instance.allocation[(u, v)], symbol="z_uv")
    for i, j in arcs:
        m.add_var(arc_name(instance, "f", i, j), "continuous", 0.0, None, symbol="f_ij")

    x = lambda i, j: arc_name(instance, "x", i, j)
    f = lambda i, j: arc_name(instance, "f", i, j)
    z = lambda u, v: f"z_{lab(node(u))}_{lab(node(v))}"
    y = lambda c: f"y_{lab(node(c))}"
    custs = [node(c) for c in range(nc)]

    for k in range(nd):
        row = {x(j, k): 1.0 for j in custs}
        for j in custs:
            row[x(k, j)] = -1.0
        m.add_constraint(f"balance_{lab(k)}", row, "=", 0.0)
        m.add_constraint(f"fleet_{lab(k)}", {x(k, j): 1.0 for j in custs}, "<=", float(instance.fleet[k]))
    for c in range(nc):
        v = node(c)
        others = [j for j in range(nd + nc) if j != v]
        row_in = {x(j, v): 1.0 for j in others}
        row_in[y(c)] = -1.0
        row_out = {x(v, j): 1.0 for j in others}
        row_out[y(c)] = -1.0
        m.add_constraint(f"in_{lab(v)}", row_in, "=", 0.0)
        m.add_constraint(f"out_{lab(v)}", row_out, "=", 0.0)
    for u in range(nc):
        m.add_constraint(f"cover_{lab(node(u))}", {y(v): 1.0 for v in instance.covered_by[u]}, ">=", 1.0)
        for v in instance.covered_by[u]:
            m.add_constraint(f"link_{lab(node(u))}_{lab(node(v))}", {z(u, v): 1.0, y(v): -1.0}, "<=", 0.0)
    for c in range(nc):
        v = node(c)
        row = {x(v, j): 1.0 for j in range(nd + nc) if j != v}
        row[z(c, c)] = -1.0
        m.add_constraint(f"selfserve_{lab(v)}", row, "<=", 0.0)
    for u in range(nc):
        m.add_constraint(f"assign_{lab(node(u))}", {z(u, v): 1.0 for v in instance.covered_by[u]}, "=", 1.0)
    serves = {v: [u for u in range(nc) if v in instance.covered_by[u]] for v in range(nc)}
    for c in range(nc):
        i = node(c)
        row: Dict[str, float] = {}
        for j in range(nd + nc):
            if j == i:
                continue
            row[f(j, i)] = row.get(f(j, i), 0.0) + 1.0
            row[f(i, j)] = row.get(f(i, j), 0.0) - 1.0
        for u in serves[c]:
            row[z(u, c)] = -float(dem[u])
        m.add_constraint(f"load_{lab(i)}", row, "=", 0.0)
    for k in range(nd):
        m.add_constraint(f"empty_{lab(k)}", {f(i, k): 1.0 for i in custs}, "=", 0.0)
    for i, j in arcs:
        if instance.is_depot(j):
            continue
        m.add_constraint(f"fmax_{lab(i)}_{lab(j)}", {f(i, j): 1.0, x(i, j): -float(Q - dnode(i))}, "<=", 0.0)
        m.add_constraint(f"fmin_{lab(i)}_{lab(j)}", {x(i, j): float(dnode(j)), f(i, j): -1.0}, "<=", 0.0)
    for k in range(nd):
        m.add_constraint(f"depotcap_{lab(k)}", {f(k, i): 1.0 for i in custs}, "<=", float(instance.depot_capacity))
    return m


@dataclass(frozen=True)
class PathCut:
    """Simple depot-to-depot path; at most len(arcs) - 1 of its arcs may be used."""

    arcs: Tuple[Tuple[int, int], ...]

    @property
    def rhs(self) -> int:
        return len(self.arcs) - 1

    def constraint(self, instance: MdctvrpInstance) -> Constraint:
        name = "path_" + "_".join(instance.label(i) for i, _ in self.arcs) + "_" + instance.label(self.arcs[-1][1])
        return Constraint(name, {arc_name(instance, "x", i, j): 1.0 for i, j in self.arcs}, "<=", float(self.rhs))


def mdctvrp_arcs(values: Point, instance: MdctvrpInstance) -> Dict[Tuple[int, int], float]:
    return {(i, j): float(values.get(arc_name(instance, "x", i, j), 0.0)) for i, j in _arcs(instance)}


def separate_depot_paths(x: Dict[Tuple[int, int], float], instance: MdctvrpInstance) -> List[PathCut]:
    """Depth-first search from every depot over used arcs through customers;
    each distinct depot reached gives the arcs of the path found to it."""
    _check_integral(x, "arc")
    succ: Dict[int, List[int]] = {}
    for (i, j), val in sorted(x.items()):
        if val > 0.5:
            succ.setdefault(i, []).append(j)
    cuts = []
    for s in range(instance.n_depots):
        parent = {s: None}
        stack = [s]
        while stack:
            i = stack.pop()
            for j in reversed(succ.get(i, [])):
                if j in parent:
                    continue
                parent[j] = i
                if instance.is_depot(j):
                    # a depot ends the walk; s itself is never re-entered here
                    path = [j]
                    while parent[path[-1]] is not None:
                        path.append(parent[path[-1]])
                    path.reverse()
                    cuts.append(PathCut(tuple(zip(path, path[1:]))))
                else:
                    stack.append(j)
    return cuts


def mdctvrp_separator(instance: MdctvrpInstance) -> Callable[[Point, MipModel], List[Constraint]]:
    def separate(values: Point, model: MipModel):
        return [c.constraint(instance) for c in separate_depot_paths(mdctvrp_arcs(values, instance), instance)]

    return separate


def decode_mdctvrp(values: Point, instance: MdctvrpInstance) -> MdctvrpSolution:
    """Follow used arcs out of each depot; every walk ends at some depot."""
    x = mdctvrp_arcs(values, instance)
    succ: Dict[int, List[int]] = {}
    for (i, j), val in sorted(x.items()):
        if val > 0.5:
            succ.setdefault(i, []).append(j)
    routes = []
    for k in range(instance.n_depots):
        for first in succ.get(k, []):
            path = [k, first]
            while not instance.is_depot(path[-1]):
                nxt = succ.get(path[-1], [])
                if not nxt or len(path) > instance.n_customers + 2:
                    raise ValueError("arc support does not decompose into depot walks")
                path.append(nxt[0])
            routes.append(path)
    nd = instance.n_depots
    serviced = {}
    for u in range(instance.n_customers):
        for v in instance.covered_by[u]:
            if values.get(f"z_{instance.label(nd + u)}_{instance.label(nd + v)}", 0.0) > 0.5:
                serviced[u] = v
    return MdctvrpSolution(routes, serviced, mdctvrp_cost(instance, routes, serviced))


def encode_mdctvrp(solution: MdctvrpSolution, instance: MdctvrpInstance) -> Point:
    """Model point of a feasible solution, including load flows."""
    nd = instance.n_depots
    values: Point = {}
    for i, j in _arcs(instance):
        values[arc_name(instance, "x", i, j)] = 0.0
        values[arc_name(instance, "f", i, j)] = 0.0
    for c in range(instance.n_customers):
        values[f"y_{instance.label(nd + c)}"] = 0.0
        for u in range(instance.n_customers):
            if c in instance.covered_by[u]:
                values[f"z_{instance.label(nd + u)}_{instance.label(nd + c)}"] = 0.0
    served_at = {}
    for u, v in solution.serviced.items():
        values[f"z_{instance.label(nd + u)}_{instance.label(nd + v)}"] = 1.0
        served_at[v] = served_at.get(v, 0) + int(instance.demand[u])
    for r in solution.routes:
        remaining = sum(served_at.get(v - nd, 0) for v in r[1:-1])
        for a, b in zip(r, r[1:]):
            values[arc_name(instance, "x", a, b)] = 1.0
            values[arc_name(instance, "f", a, b)] = float(remaining)
            if not instance.is_depot(b):
                values[f"y_{instance.label(b)}"] = 1.0
                remaining -= served_at.get(b - nd, 0)
    return values
