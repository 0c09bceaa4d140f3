"""Route-pool matheuristic and the exact oracle for tiny instances.

A pool of feasible routes is solved as a set covering / packing problem:
pick routes of minimum total cost so that every demand vertex is serviced by
at least one picked route and every vertex is visited by at most one.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .core import CcspInstance, Route, Solution, path_cost, route_cost

DEFAULT_POOL_LIMIT = 1_000_000
BNB_EXACT_LIMIT = 50_000
EXACT_ORACLE_LIMIT = 10


class InfeasiblePoolError(ValueError):
    def __init__(self, uncovered):
        self.uncovered = sorted(uncovered)
        if self.uncovered:
            msg = f"no pooled route services demand vertices {self.uncovered}"
        else:
            msg = "every demand is covered, but no selection of pooled routes visits each vertex at most once"
        super().__init__(msg)


@dataclass(frozen=True)
class PooledRoute:
    nodes: Tuple[int, ...]
    cost: float
    serviced: Tuple[Tuple[int, int], ...]  # sorted (u, v) pairs
    covered: FrozenSet[int]
    visited: FrozenSet[int]
    load: int

    @classmethod
    def from_route(cls, route: Route, instance: CcspInstance) -> "PooledRoute":
        return cls(
            nodes=tuple(route.nodes),
            cost=route_cost(instance, route),
            serviced=tuple(sorted(route.serviced.items())),
            covered=frozenset(route.serviced),
            visited=frozenset(route.visits),
            load=route.load(instance),
        )

    def to_route(self) -> Route:
        return Route(list(self.nodes), dict(self.serviced))

    def is_feasible(self, instance: CcspInstance) -> bool:
        nodes = self.nodes
        depot = instance.depot
        if len(nodes) < 3 or nodes[0] != depot or nodes[-1] != depot:
            return False
        inner = nodes[1:-1]
        if depot in inner or len(set(inner)) != len(inner):
            return False
        if self.load > instance.capacity:
            return False
        return all(v in self.visited and v in instance.covered_by[u] for u, v in self.serviced)


class RoutePool:
    """Deduplicated routes, capped at ``limit``."""

    def __init__(self, limit: int = DEFAULT_POOL_LIMIT):
        self.limit = limit
        self.routes: List[PooledRoute] = []
        self._keys = set()

    def __len__(self):
        return len(self.routes)

    def __iter__(self):
        return iter(self.routes)

    @property
    def full(self) -> bool:
        return len(self.routes) >= self.limit

    def add(self, route: PooledRoute) -> bool:
        if self.full:
            return False
        seq = route.nodes
        key = (min(seq, seq[::-1]), route.serviced)
        if key in self._keys:
            return False
        self._keys.add(key)
        self.routes.append(route)
        return True

    def extend(self, routes: Iterable[PooledRoute]) -> int:
        return sum(self.add(r) for r in routes)


# ---------------------------------------------------------------------------
# pool construction
# ---------------------------------------------------------------------------


def _walk_ok(seq: np.ndarray) -> np.ndarray:
    """Rows where each repeated vertex occurs in one consecutive block."""
    m, k = seq.shape
    ok = np.ones(m, dtype=bool)
    for i in range(k):
        for j in range(i + 2, k):
            same = seq[:, i] == seq[:, j]
            gap = np.zeros(m, dtype=bool)
            for l in range(i + 1, j):
                gap |= seq[:, l] != seq[:, i]
            ok &= ~(same & gap)
    return ok


def _best_routes_for(subset: Sequence[int], instance: CcspInstance, keep_all: bool) -> List[Route]:
    depot, d = instance.depot, instance.dist
    choices = np.array(list(itertools.product(*(instance.covered_by[u] for u in subset))), dtype=np.int64)
    k = len(subset)
    best_cost = np.full(len(choices), np.inf)
    best_perm = np.zeros(len(choices), dtype=np.int64)
    perms = list(itertools.permutations(range(k)))
    for p_idx, perm in enumerate(perms):
        seq = choices[:, perm]
        cost = d[depot, seq[:, 0]] + d[seq[:, -1], depot]
        for t in range(k - 1):
            cost = cost + d[seq[:, t], seq[:, t + 1]]
        if k > 2:
            cost = np.where(_walk_ok(seq), cost, np.inf)
        better = cost < best_cost
        best_cost[better] = cost[better]
        best_perm[better] = p_idx

    def build(row):
        seq = choices[row, list(perms[best_perm[row]])]
        nodes = [depot]
        for v in seq:
            if v != nodes[-1]:
                nodes.append(int(v))
        nodes.append(depot)
        return Route(nodes, {u: int(v) for u, v in zip(subset, choices[row])})

    if not keep_all:
        return [build(int(np.argmin(best_cost)))]
    out = {}
    for row in np.argsort(best_cost, kind="stable"):
        visited = frozenset(int(v) for v in choices[row])
        if visited not in out:
            out[visited] = build(int(row))
    return list(out.values())


def enumerate_small_routes(instance: CcspInstance, max_serviced: int = 3, keep_all: bool = False) -> List[PooledRoute]:
    """Cheapest route for every capacity-feasible set of up to ``max_serviced``
    demand vertices, over all choices of covering vertex and visit order.

    With ``keep_all`` every distinct visited set of each subset is kept
    (its cheapest representative), not only the overall cheapest.
    """
    dem = instance.demand
    out = []
    for size in range(1, max_serviced + 1):
        for subset in itertools.combinations(instance.demand_vertices, size):
            if sum(int(dem[u]) for u in subset) > instance.capacity:
                continue
            out.extend(PooledRoute.from_route(r, instance) for r in _best_routes_for(subset, instance, keep_all))
    return out


def harvest_elite_routes(archive, pool: RoutePool, instance: CcspInstance) -> RoutePool:
    """Append archived elite routes, newest generation first, until the pool is full.

    ``archive`` is a :class:`ccsp.brkga.RouteArchive` or an already ordered
    sequence of routes.
    """
    routes = archive.newest_first() if hasattr(archive, "newest_first") else archive
    for r in routes:
        if pool.full:
            break
        pr = PooledRoute.from_route(r, instance)
        if pr.is_feasible(instance):
            pool.add(pr)
    return pool


# ---------------------------------------------------------------------------
# cover / packing solve
# ---------------------------------------------------------------------------


@dataclass
class CoverResult:
    solution: Solution
    objective: float
    lower_bound: float
    optimal: bool
    selected: List[int] = field(default_factory=list)


def _solution_from_selection(routes: Sequence[PooledRoute], selected: Sequence[int], instance: CcspInstance) -> Solution:
    out = []
    taken = set()
    for i in sorted(selected):
        pr = routes[i]
        serviced = {u: v for u, v in pr.serviced if u not in taken}
        taken.update(serviced)
        if serviced:
            out.append(Route(list(pr.nodes), serviced))
    return Solution.from_routes(instance, out)


def _bnb_cover_packing(routes: Sequence[PooledRoute], instance: CcspInstance, time_limit, incumbent):
    dem = list(instance.demand_vertices)
    didx = {u: i for i, u in enumerate(dem)}
    vbit = {v: i for i, v in enumerate(instance.customers)}
    cost = [r.cost for r in routes]
    cmask = [sum(1 << didx[u] for u in r.covered if u in didx) for r in routes]
    vmask = [sum(1 << vbit[v] for v in r.visited) for r in routes]
    by_demand: List[List[int]] = [[] for _ in dem]
    for i, r in enumerate(routes):
        for u in r.covered:
            if u in didx:
                by_demand[didx[u]].append(i)
    for lst in by_demand:
        lst.sort(key=lambda i: (cost[i], i))
    share = [min(cost[i] / bin(cmask[i]).count("1") for i in lst) for lst in by_demand]
    cheapest = [cost[lst[0]] for lst in by_demand]

    full = (1 << len(dem)) - 1
    best = [float("inf"), None]
    if incumbent is not None:
        best = [sum(cost[i] for i in incumbent), list(incumbent)]
    start = time.perf_counter()
    nodes = [0]
    timed_out = [False]
    eps = 1e-9

    def bound(unc):
        s, m = 0.0, 0.0
        i = 0
        while unc:
            if unc & 1:
                s += share[i]
                m = max(m, cheapest[i])
            unc >>= 1
            i += 1
        return max(s, m)

    def dfs(unc, used, acc, chosen):
        if timed_out[0]:
            return
        nodes[0] += 1
        if time_limit is not None and nodes[0] % 512 == 0 and time.perf_counter() - start > time_limit:
            timed_out[0] = True
            return
        if not unc:
            if acc < best[0] - eps:
                best[0], best[1] = acc, list(chosen)
            return
        if acc + bound(unc) >= best[0] - eps:
            return
        # branch on the uncovered demand with the fewest compatible routes
        pick, pick_list = None, None
        u, rest = 0, unc
        while rest:
            if rest & 1:
                lst = [i for i in by_demand[u] if not vmask[i] & used]
                if not lst:
                    return
                if pick_list is None or len(lst) < len(pick_list):
                    pick, pick_list = u, lst
            rest >>= 1
            u += 1
        for i in pick_list:
            if acc + cost[i] >= best[0] - eps:
                break
            chosen.append(i)
            dfs(unc & ~cmask[i], used | vmask[i], acc + cost[i], chosen)
            chosen.pop()

    root_bound = bound(full)
    dfs(full, 0, 0.0, [])
    optimal = not timed_out[0]
    lb = best[0] if optimal else min(root_bound, best[0])
    return best[1], best[0], lb, optimal


def cover_packing_model(routes: Sequence[PooledRoute], instance: CcspInstance):
    from .mip.model import MipModel

    m = MipModel("cover_packing")
    for i, r in enumerate(routes):
        m.add_var(f"lam_{i}", "binary", obj=r.cost)
    for u in instance.demand_vertices:
        m.add_constraint(f"cover_{u + 1}", {f"lam_{i}": 1.0 for i, r in enumerate(routes) if u in r.covered}, ">=", 1.0)
    for v in instance.customers:
        coeffs = {f"lam_{i}": 1.0 for i, r in enumerate(routes) if v in r.visited}
        if len(coeffs) > 1:
            m.add_constraint(f"pack_{v + 1}", coeffs, "<=", 1.0)
    return m


def solve_cover_packing(
    pool,
    instance: CcspInstance,
    backend=None,
    time_limit: Optional[float] = None,
    incumbent: Optional[Sequence[int]] = None,
) -> CoverResult:
    """Exact selection of pooled routes.

    Without ``backend`` a depth-first branch-and-bound is used (pools up to
    50,000 routes); with a MIP backend the 0-1 model is handed over.
    ``incumbent`` lists pool indices of a known feasible selection.
    """
    routes = list(pool)
    covered = set().union(*(r.covered for r in routes)) if routes else set()
    missing = set(instance.demand_vertices) - covered
    if missing:
        raise InfeasiblePoolError(missing)
    if not instance.demand_vertices:
        return CoverResult(Solution([], 0.0), 0.0, 0.0, True, [])

    if backend is None:
        if len(routes) > BNB_EXACT_LIMIT:
            raise ValueError(f"pool of {len(routes)} routes needs a MIP backend (built-in limit {BNB_EXACT_LIMIT})")
        selected, obj, lb, optimal = _bnb_cover_packing(routes, instance, time_limit, incumbent)
        if selected is None:
            raise InfeasiblePoolError(set())
    else:
        model = cover_packing_model(routes, instance)
        start = None
        if incumbent is not None:
            start = {f"lam_{i}": 1.0 for i in incumbent}
        res = backend.solve(model, time_limit=time_limit, incumbent=start)
        if res.values is None:
            raise InfeasiblePoolError(set())
        selected = [i for i in range(len(routes)) if res.values.get(f"lam_{i}", 0.0) > 0.5]
        obj, lb, optimal = res.objective, res.bound, res.status == "optimal"
    sol = _solution_from_selection(routes, selected, instance)
    return CoverResult(sol, obj, lb, optimal, sorted(selected))


# ---------------------------------------------------------------------------
# exact oracle
# ---------------------------------------------------------------------------


def _held_karp(instance: CcspInstance, verts: Sequence[int]):
    """Optimal closed tour from the depot over every subset of ``verts``."""
    n = len(verts)
    d = instance.dist
    depot = instance.depot
    INF = float("inf")
    dp = [[INF] * n for _ in range(1 << n)]
    parent = [[-1] * n for _ in range(1 << n)]
    for j in range(n):
        dp[1 << j][j] = d[depot, verts[j]]
    for mask in range(1, 1 << n):
        row = dp[mask]
        for j in range(n):
            cj = row[j]
            if cj == INF:
                continue
            for k in range(n):
                if mask >> k & 1:
                    continue
                nm = mask | (1 << k)
                c = cj + d[verts[j], verts[k]]
                if c < dp[nm][k]:
                    dp[nm][k] = c
                    parent[nm][k] = j
    tours = {}
    for mask in range(1, 1 << n):
        j = min(range(n), key=lambda j: dp[mask][j] + d[verts[j], depot] if mask >> j & 1 else INF)
        order = []
        m, cur = mask, j
        while cur != -1:
            order.append(verts[cur])
            m, cur = m & ~(1 << cur), parent[m][cur]
        tours[mask] = [depot] + order[::-1] + [depot]
    return tours


def exact_ccsp(instance: CcspInstance, time_limit: Optional[float] = None) -> Solution:
    """Provably optimal solution by enumerating every feasible route.

    For each visited vertex set the cheapest tour is taken and paired with
    every inclusion-maximal capacity-feasible set of demands it can service;
    the covering/packing problem over that complete pool is then solved exactly.
    """
    verts = list(instance.customers)
    if len(verts) > EXACT_ORACLE_LIMIT:
        raise ValueError(f"exact oracle limited to {EXACT_ORACLE_LIMIT} non-depot vertices, got {len(verts)}")
    if not instance.demand_vertices:
        return Solution([], 0.0)
    dem = instance.demand
    Q = instance.capacity
    tours = _held_karp(instance, verts)
    pool = RoutePool(limit=10**9)
    for mask, nodes in tours.items():
        W = {verts[j] for j in range(len(verts)) if mask >> j & 1}
        T = [u for u in instance.demand_vertices if W.intersection(instance.covered_by[u])]
        if not T:
            continue
        for r in range(len(T), 0, -1):
            for S in itertools.combinations(T, r):
                load = sum(int(dem[u]) for u in S)
                if load > Q:
                    continue
                if any(load + dem[u] <= Q for u in T if u not in S):
                    continue  # not maximal
                serviced = {u: min(v for v in instance.covered_by[u] if v in W) for u in S}
                pool.add(PooledRoute.from_route(Route(list(nodes), serviced), instance))
    res = solve_cover_packing(pool, instance, time_limit=time_limit)
    if not res.optimal:
        raise TimeoutError("exact oracle hit its time limit")
    return res.solution


# ---------------------------------------------------------------------------
# pool files: "cost | 1 4 7 1 | 4:4 9:7" per line, 1-based ids
# ---------------------------------------------------------------------------


def write_pool(pool, instance_name: str = "") -> str:
    lines = [f"# route pool {instance_name}".rstrip()]
    for r in pool:
        nodes = " ".join(str(v + 1) for v in r.nodes)
        serv = " ".join(f"{u + 1}:{v + 1}" for u, v in r.serviced)
        lines.append(f"{r.cost!r} | {nodes} | {serv}")
    return "\n".join(lines) + "\n"


def read_pool(text: str, instance: CcspInstance, limit: int = DEFAULT_POOL_LIMIT) -> RoutePool:
    pool = RoutePool(limit)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split("|")]
        if len(parts) != 3:
            raise ValueError(f"pool line {lineno}: expected 'cost | nodes | services'")
        nodes = [int(t) - 1 for t in parts[1].split()]
        serviced = {}
        for tok in parts[2].split():
            u, _, v = tok.partition(":")
            serviced[int(u) - 1] = int(v) - 1
        pr = PooledRoute.from_route(Route(nodes, serviced), instance)
        if not pr.is_feasible(instance):
            raise ValueError(f"pool line {lineno}: infeasible route")
        if abs(pr.cost - float(parts[0])) > 1e-6:
            raise ValueError(f"pool line {lineno}: stated cost {parts[0]} differs from {pr.cost}")
        pool.add(pr)
    return pool
