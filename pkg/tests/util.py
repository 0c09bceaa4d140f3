"""Shared fixtures and independent brute-force oracles for the test suite.

The oracles here deliberately avoid the package's own algorithms: they
enumerate permutations and subsets with itertools and plain lists.
"""
from __future__ import annotations

import itertools
import math
from typing import Dict, List, Optional, Sequence

import numpy as np

from ccsp.core import CcspInstance, Metric, Route, Solution
from ccsp.instance_io import random_ccsp


def make_instance(coords, demand, capacity, covers=None, metric=Metric.EXACT, name="t") -> CcspInstance:
    """Instance with vertex 0 as depot; ``covers`` maps v -> D(v) (default {v})."""
    n = len(coords)
    covers = covers or {}
    full = [()] + [tuple(covers.get(v, (v,))) for v in range(1, n)]
    return CcspInstance(name, np.asarray(coords, float), np.asarray(demand), capacity, tuple(full), 0, metric)


def tiny_instance(seed: int, metric: Optional[Metric] = None) -> CcspInstance:
    """Random instance with 4..7 non-depot vertices, 2..4 demands, 1..3 vehicles."""
    rng = np.random.default_rng(seed)
    if metric is None:
        metric = Metric.EXACT if seed % 2 else Metric.ROUNDED
    n_cust = int(rng.integers(4, 8))
    n_dem = int(rng.integers(2, 5))
    vehicles = int(rng.integers(1, 4))
    return random_ccsp(rng, n_cust, n_dem, 3, vehicles, metric, name=f"tiny{seed}")


def euclid(p, q, metric=Metric.EXACT) -> float:
    d = math.hypot(p[0] - q[0], p[1] - q[1])
    return float(math.floor(d + 0.5)) if metric is Metric.ROUNDED else d


def tour_length(inst: CcspInstance, nodes: Sequence[int]) -> float:
    return sum(euclid(inst.coords[a], inst.coords[b], inst.metric) for a, b in zip(nodes, nodes[1:]))


def brute_tour(inst: CcspInstance, verts: Sequence[int]) -> float:
    """Cheapest depot tour through ``verts`` by trying every ordering."""
    best = math.inf
    for perm in itertools.permutations(verts):
        best = min(best, tour_length(inst, (inst.depot,) + perm + (inst.depot,)))
    return best


def brute_small_route_cost(inst: CcspInstance, subset: Sequence[int]) -> float:
    """Cheapest route servicing exactly ``subset``: every assignment of a
    covering vertex to each demand, every ordering of the chosen vertices."""
    cover_of = {u: [v for v in range(inst.n) if v != inst.depot and u in inst.covers[v]] for u in subset}
    best = math.inf
    for choice in itertools.product(*(cover_of[u] for u in subset)):
        best = min(best, brute_tour(inst, sorted(set(choice))))
    return best


def brute_selection(routes, inst: CcspInstance) -> float:
    """Cheapest subset of pooled routes that services every demand and
    visits every vertex at most once; inf when none exists."""
    best = math.inf
    dem = set(inst.demand_vertices)
    for r in range(len(routes) + 1):
        for pick in itertools.combinations(routes, r):
            visits = [v for p in pick for v in p.visited]
            if len(visits) != len(set(visits)):
                continue
            covered = set().union(*(p.covered for p in pick)) if pick else set()
            if not dem <= covered:
                continue
            best = min(best, sum(p.cost for p in pick))
    return best


def brute_partition(inst: CcspInstance) -> float:
    """Exact CCSP optimum for tiny instances by direct enumeration: split the
    demands into groups (set partitions), give each group a distinct covering
    vertex set, and take the cheapest tour of every group.

    Only exact for metrics obeying the triangle inequality, where a detour
    through an unneeded vertex never pays off."""
    dem = list(inst.demand_vertices)
    Q = inst.capacity
    cover_of = {u: inst.covered_by[u] for u in dem}
    best = math.inf

    def partitions(items):
        if not items:
            yield []
            return
        first, rest = items[0], items[1:]
        for part in partitions(rest):
            for k in range(len(part)):
                yield part[:k] + [[first] + part[k]] + part[k + 1:]
            yield [[first]] + part

    for part in partitions(dem):
        if any(sum(int(inst.demand[u]) for u in g) > Q for g in part):
            continue
        for choice in itertools.product(*(cover_of[u] for u in dem)):
            server = dict(zip(dem, choice))
            groups = [sorted({server[u] for u in g}) for g in part]
            flat = [v for g in groups for v in g]
            if len(flat) != len(set(flat)):
                continue
            best = min(best, sum(brute_tour(inst, g) for g in groups))
    return best


def best_fit_by_hand(demands: Sequence[int], Q: int) -> List[List[int]]:
    """Step-by-step Best-Fit with plain lists; returns item indices per bin."""
    bins: List[List[int]] = []
    loads: List[int] = []
    for i, d in enumerate(demands):
        fits = [m for m in range(len(bins)) if loads[m] + d <= Q]
        if fits:
            top = max(loads[m] for m in fits)
            m = min(m for m in fits if loads[m] == top)
            bins[m].append(i)
            loads[m] += d
        else:
            bins.append([i])
            loads.append(d)
    return bins


def brute_bin_packing(demands: Sequence[int], Q: int) -> int:
    """Fewest bins by trying every assignment of items to at most n bins
    (items in order, each either joins an open bin or opens the next one)."""
    n = len(demands)
    best = n

    def go(i, loads):
        nonlocal best
        if len(loads) >= best:
            return
        if i == n:
            best = len(loads)
            return
        d = demands[i]
        for m in range(len(loads)):
            if loads[m] + d <= Q:
                loads[m] += d
                go(i + 1, loads)
                loads[m] -= d
        loads.append(d)
        go(i + 1, loads)
        loads.pop()

    go(0, [])
    return best


def route(nodes, serviced: Dict[int, int]) -> Route:
    return Route(list(nodes), dict(serviced))


def solution(inst: CcspInstance, routes: List[Route]) -> Solution:
    return Solution.from_routes(inst, routes)
