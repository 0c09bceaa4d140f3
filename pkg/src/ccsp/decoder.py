"""Chromosome -> CCSP solution.

The decoder runs in four steps: sort the random keys, pack the demand
vertices into vehicles with Best-Fit, build one route per vehicle by cheapest
insertion of a covering vertex, then greedily drop redundant visits.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sortedcontainers import SortedList

from .core import CcspInstance, Route, Solution, route_cost

EPS = 1e-9


@dataclass
class Assignment:
    vehicles: List[List[int]] = field(default_factory=list)
    loads: List[int] = field(default_factory=list)

    @property
    def M(self) -> int:
        return len(self.vehicles)


def sort_keys(keys: Sequence[float], vertices: Sequence[int]) -> List[int]:
    """Demand vertices ordered by non-decreasing key (stable)."""
    order = np.argsort(np.asarray(keys), kind="stable")
    return [vertices[i] for i in order]


def best_fit(order: Sequence[int], instance: CcspInstance) -> Assignment:
    """Put each vertex in the fullest vehicle that still fits it; open a new
    vehicle only when none does.  Ties go to the lowest vehicle index."""
    Q = instance.capacity
    out = Assignment()
    index = SortedList()  # (load, -vehicle)
    for v in order:
        d = int(instance.demand[v])
        pos = index.bisect_right((Q - d, float("inf"))) - 1
        if pos >= 0:
            load, neg = index.pop(pos)
            m = -neg
            out.vehicles[m].append(v)
            out.loads[m] = load + d
            index.add((load + d, neg))
        else:
            m = len(out.vehicles)
            out.vehicles.append([v])
            out.loads.append(d)
            index.add((d, -m))
    return out


def insertion_cost(v: int, nodes: Sequence[int], instance: CcspInstance) -> Tuple[float, int]:
    """Cheapest insertion of v into the closed tour ``nodes``.

    Returns (cost increase, i) where v goes between nodes[i] and nodes[i+1];
    ties resolve to the earliest position.
    """
    d = instance.dist
    a = np.asarray(nodes[:-1])
    b = np.asarray(nodes[1:])
    g = d[a, v] + d[v, b] - d[a, b]
    i = int(np.argmin(g))
    return float(g[i]), i


def construct_routes(assignment: Assignment, instance: CcspInstance) -> Solution:
    """Build one route per vehicle.

    For every demand vertex u of vehicle m (in assignment order) the vertex
    covering u with the cheapest insertion into route m is added, chosen among
    covering vertices not yet visited by any route.  A covering vertex already
    on route m is reused at zero cost when no insertion is cheaper.

    Demands whose covering vertices are all taken by other routes are handled
    afterwards by :func:`_repair`.
    """
    depot = instance.depot
    visited = set()
    routes: List[Route] = []
    stuck: List[int] = []
    for vehicle in assignment.vehicles:
        nodes = [depot, depot]
        serviced: Dict[int, int] = {}
        onroute = set()
        for u in vehicle:
            best = None
            for v in instance.covered_by[u]:
                if v in visited:
                    continue
                g, pos = insertion_cost(v, nodes, instance)
                if best is None or g < best[0] - EPS:
                    best = (g, v, pos)
            reuse = [v for v in instance.covered_by[u] if v in onroute]
            if reuse and (best is None or best[0] >= -EPS):
                serviced[u] = reuse[0]
                continue
            if best is None:
                stuck.append(u)
                continue
            _, v, pos = best
            nodes.insert(pos + 1, v)
            visited.add(v)
            onroute.add(v)
            serviced[u] = v
        routes.append(Route(nodes, serviced))
    if stuck:
        _repair(routes, stuck, instance)
    routes = [r for r in routes if r.visits]
    return Solution.from_routes(instance, routes)


def _repair(routes: List[Route], stuck: List[int], instance: CcspInstance) -> None:
    """Service demands left without a free covering vertex.

    In order of preference: a visited covering vertex on a route with spare
    capacity; an unvisited covering vertex (inserted where cheapest, or on a
    new route); otherwise u itself is on some route, so it is pulled out into a
    new out-and-back route serving u, and the demands it was covering there go
    back into the queue.  Each pull-out creates a route whose vertex serves
    itself and is never pulled again, so the loop terminates.
    """
    Q, depot, d = instance.capacity, instance.depot, instance.demand
    queue = deque(stuck)
    while queue:
        u = queue.popleft()
        du = int(d[u])
        where = {v: k for k, r in enumerate(routes) for v in r.visits}
        loads = [r.load(instance) for r in routes]

        fits = [(-loads[where[v]], where[v], v) for v in instance.covered_by[u] if v in where and loads[where[v]] + du <= Q]
        if fits:
            _, k, v = min(fits)
            routes[k].serviced[u] = v
            continue

        free = [v for v in instance.covered_by[u] if v not in where]
        if free:
            best = None
            for k, r in enumerate(routes):
                if loads[k] + du > Q:
                    continue
                for v in free:
                    g, pos = insertion_cost(v, r.nodes, instance)
                    if best is None or g < best[0] - EPS:
                        best = (g, k, v, pos)
            for v in free:
                g = 2.0 * instance.cost(depot, v)
                if best is None or g < best[0] - EPS:
                    best = (g, None, v, None)
            _, k, v, pos = best
            if k is None:
                routes.append(Route([depot, v, depot], {u: v}))
            else:
                routes[k].nodes.insert(pos + 1, v)
                routes[k].serviced[u] = v
            continue

        k = where[u]
        r = routes[k]
        r.nodes.remove(u)
        orphans = [w for w, s in r.serviced.items() if s == u]
        for w in orphans:
            del r.serviced[w]
        queue.extend(orphans)
        routes.append(Route([depot, u, depot], {u: u}))


def _reassignment(routes: List[Route], loads: List[int], where: Dict[int, int], k: int, v: int, instance: CcspInstance):
    """Plan to move every demand serviced by v elsewhere, or None."""
    Q, d = instance.capacity, instance.demand
    served = sorted((u for u, s in routes[k].serviced.items() if s == v), key=lambda u: (-d[u], u))
    loads = list(loads)
    loads[k] -= int(sum(d[u] for u in served))
    plan = []
    for u in served:
        best = None
        for w in instance.covered_by[u]:
            if w == v or w not in where:
                continue
            j = where[w]
            if loads[j] + d[u] > Q:
                continue
            key = (-loads[j], j, w)
            if best is None or key < best:
                best = key
        if best is None:
            return None
        _, j, w = best
        loads[j] += int(d[u])
        plan.append((u, j, w))
    return plan


def remove_redundant(solution: Solution, instance: CcspInstance) -> Solution:
    """Drop redundant visits one at a time, largest saving first, until none is left.

    A visit is redundant if the demands it services can all move to other
    visited covering vertices with spare capacity.  Moves with negative
    saving are never taken.
    """
    routes = [r.copy() for r in solution.routes]
    dist = instance.dist
    while True:
        where = {v: k for k, r in enumerate(routes) for v in r.visits}
        loads = [r.load(instance) for r in routes]
        best = None
        for k, r in enumerate(routes):
            nodes = r.nodes
            for pos in range(1, len(nodes) - 1):
                a, v, b = nodes[pos - 1], nodes[pos], nodes[pos + 1]
                saving = dist[a, v] + dist[v, b] - dist[a, b]
                if saving < -EPS:
                    continue
                if best is not None and (saving < best[0] - EPS or (saving <= best[0] + EPS and v > best[1])):
                    continue
                plan = _reassignment(routes, loads, where, k, v, instance)
                if plan is None:
                    continue
                best = (saving, v, k, plan)
        if best is None:
            break
        _, v, k, plan = best
        routes[k].nodes.remove(v)
        for u, j, w in plan:
            del routes[k].serviced[u]
            routes[j].serviced[u] = w
    routes = [r for r in routes if r.visits]
    return Solution.from_routes(instance, routes)


def decode(keys: Sequence[float], instance: CcspInstance) -> Solution:
    order = sort_keys(keys, instance.demand_vertices)
    sol = construct_routes(best_fit(order, instance), instance)
    return remove_redundant(sol, instance)


class CcspDecoder:
    """Picklable decoder callable for the BRKGA engine: keys -> (cost, solution)."""

    def __init__(self, instance: CcspInstance):
        self.instance = instance

    def __call__(self, keys) -> Tuple[float, Solution]:
        sol = decode(keys, self.instance)
        return sol.cost, sol
