"""Instances, routes, solutions, costs and the independent feasibility checker.

Vertex ids are 0-based indices into the coordinate array.  Files on disk use
1-based ids; translation happens in :mod:`ccsp.instance_io`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

COST_TOL = 1e-6


class Metric(str, enum.Enum):
    ROUNDED = "rounded-euclidean"
    EXACT = "exact-euclidean"


class InfeasibleInstanceError(ValueError):
    """Raised when an instance cannot admit any feasible solution."""


def distance_matrix(coords: np.ndarray, metric: Metric) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    d = np.sqrt((diff ** 2).sum(axis=-1))
    if Metric(metric) is Metric.ROUNDED:
        # TSPLIB nint
        d = np.floor(d + 0.5)
    return d


@dataclass(frozen=True, eq=False)
class CcspInstance:
    """A CCSP instance on a complete undirected graph.

    ``covers[v]`` is the ordered cover set D(v) (vertices serviced from v);
    the depot's entry is empty.  ``covered_by`` is derived.
    """

    name: str
    coords: np.ndarray
    demand: np.ndarray
    capacity: int
    covers: Tuple[Tuple[int, ...], ...]
    depot: int = 0
    metric: Metric = Metric.ROUNDED
    comment: str = ""

    # derived, filled in __post_init__
    covered_by: Tuple[Tuple[int, ...], ...] = field(init=False, repr=False)
    demand_vertices: Tuple[int, ...] = field(init=False, repr=False)
    dist: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float).reshape(-1, 2)
        demand = np.asarray(self.demand, dtype=np.int64).reshape(-1)
        n = len(coords)
        if len(demand) != n or len(self.covers) != n:
            raise ValueError("coords, demand and covers must have one entry per vertex")
        if not 0 <= self.depot < n:
            raise ValueError(f"depot {self.depot} out of range")
        if self.capacity <= 0:
            raise ValueError("capacity must be positive")
        if demand[self.depot] != 0:
            raise ValueError("depot must have zero demand")
        if (demand < 0).any():
            raise ValueError("demands must be non-negative")
        over = [int(v) for v in np.flatnonzero(demand > self.capacity)]
        if over:
            raise InfeasibleInstanceError(f"demand exceeds capacity at vertices {over}")

        covers = tuple(tuple(int(u) for u in d) for d in self.covers)
        if covers[self.depot]:
            raise ValueError("the depot has no cover set")
        cov_by: List[List[int]] = [[] for _ in range(n)]
        for v, dv in enumerate(covers):
            if v == self.depot:
                continue
            if v not in dv:
                raise ValueError(f"vertex {v} must cover itself")
            if len(set(dv)) != len(dv):
                raise ValueError(f"duplicate entries in cover set of {v}")
            for u in dv:
                if not 0 <= u < n or u == self.depot:
                    raise ValueError(f"cover set of {v} holds invalid vertex {u}")
                cov_by[u].append(v)

        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "demand", demand)
        object.__setattr__(self, "covers", covers)
        object.__setattr__(self, "metric", Metric(self.metric))
        object.__setattr__(self, "covered_by", tuple(tuple(sorted(c)) for c in cov_by))
        object.__setattr__(self, "demand_vertices", tuple(int(v) for v in np.flatnonzero(demand > 0)))
        object.__setattr__(self, "dist", distance_matrix(coords, self.metric))

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def customers(self) -> Tuple[int, ...]:
        """V0: every vertex except the depot."""
        return tuple(v for v in range(self.n) if v != self.depot)

    def cost(self, u: int, v: int) -> float:
        return float(self.dist[u, v])

    def __eq__(self, other):
        if not isinstance(other, CcspInstance):
            return NotImplemented
        return (
            self.name == other.name
            and self.depot == other.depot
            and self.capacity == other.capacity
            and self.metric == other.metric
            and self.covers == other.covers
            and self.comment == other.comment
            and np.array_equal(self.coords, other.coords)
            and np.array_equal(self.demand, other.demand)
        )

    __hash__ = None


def edge_cost(instance: CcspInstance, u: int, v: int) -> float:
    for w in (u, v):
        if not 0 <= w < instance.n:
            raise KeyError(f"unknown vertex {w}")
    return instance.cost(u, v)


@dataclass
class Route:
    """A closed tour ``nodes`` (depot first and last) and the demands it services.

    ``serviced`` maps each demand vertex u to the vertex on this route that
    covers it.
    """

    nodes: List[int]
    serviced: Dict[int, int] = field(default_factory=dict)

    @property
    def visits(self) -> List[int]:
        return self.nodes[1:-1]

    def load(self, instance: CcspInstance) -> int:
        return int(sum(instance.demand[u] for u in self.serviced))

    def copy(self) -> "Route":
        return Route(list(self.nodes), dict(self.serviced))


def path_cost(instance: CcspInstance, nodes: Sequence[int]) -> float:
    d = instance.dist
    return float(sum(d[a, b] for a, b in zip(nodes, nodes[1:])))


def route_cost(instance: CcspInstance, route: Route) -> float:
    return path_cost(instance, route.nodes)


@dataclass
class Solution:
    routes: List[Route]
    cost: float

    @property
    def K(self) -> int:
        return sum(1 for r in self.routes if r.visits)

    @classmethod
    def from_routes(cls, instance: CcspInstance, routes: List[Route]) -> "Solution":
        return cls(routes, sum(route_cost(instance, r) for r in routes))

    def copy(self) -> "Solution":
        return Solution([r.copy() for r in self.routes], self.cost)


class ViolationKind(str, enum.Enum):
    DUPLICATE_VISIT = "DuplicateVisit"
    COVERAGE = "CoverageViolation"
    CAPACITY = "CapacityViolation"
    NOT_A_CYCLE = "NotACycle"
    SERVICE_OUTSIDE_COVER = "ServiceOutsideCoverSet"
    COST_MISMATCH = "CostMismatch"
    FLEET = "FleetSizeViolation"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    message: str

    def __str__(self):
        return f"{self.kind.value}: {self.message}"


def validate(instance: CcspInstance, solution: Solution, max_fleet: Optional[int] = None) -> List[Violation]:
    """Check every route and solution constraint; an empty list means feasible.

    The fleet bound is only checked when ``max_fleet`` is given.
    """
    out: List[Violation] = []

    def report(kind, msg):
        out.append(Violation(kind, msg))

    n, depot = instance.n, instance.depot
    seen: Dict[int, int] = {}
    servers: Dict[int, List[int]] = {}
    for k, route in enumerate(solution.routes):
        nodes = route.nodes
        if len(nodes) < 2 or nodes[0] != depot or nodes[-1] != depot:
            report(ViolationKind.NOT_A_CYCLE, f"route {k} does not start and end at the depot")
        interior = nodes[1:-1]
        bad = [v for v in interior if not (0 <= v < n) or v == depot]
        if bad:
            report(ViolationKind.NOT_A_CYCLE, f"route {k} has invalid interior vertices {bad}")
        if len(set(interior)) != len(interior):
            report(ViolationKind.NOT_A_CYCLE, f"route {k} repeats a vertex")
        for v in set(interior):
            if v in seen and seen[v] != k:
                report(ViolationKind.DUPLICATE_VISIT, f"vertex {v} visited by routes {seen[v]} and {k}")
            else:
                seen[v] = k

        onroute = set(interior)
        load = 0
        for u, v in route.serviced.items():
            if not (0 <= u < n) or instance.demand[u] <= 0:
                report(ViolationKind.SERVICE_OUTSIDE_COVER, f"route {k} services non-demand vertex {u}")
                continue
            if v not in instance.covered_by[u]:
                report(ViolationKind.SERVICE_OUTSIDE_COVER, f"route {k} services {u} from {v}, which does not cover it")
            if v not in onroute:
                report(ViolationKind.SERVICE_OUTSIDE_COVER, f"route {k} services {u} from unvisited vertex {v}")
            load += int(instance.demand[u])
            servers.setdefault(u, []).append(k)
        if load > instance.capacity:
            report(ViolationKind.CAPACITY, f"route {k} load {load} exceeds capacity {instance.capacity}")

    for u in instance.demand_vertices:
        ks = servers.get(u, [])
        if not ks:
            report(ViolationKind.COVERAGE, f"demand vertex {u} is not serviced")
        elif len(ks) > 1:
            report(ViolationKind.COVERAGE, f"demand vertex {u} serviced by routes {ks}")

    total = sum(route_cost(instance, r) for r in solution.routes)
    if not math.isclose(total, solution.cost, rel_tol=0.0, abs_tol=COST_TOL):
        report(ViolationKind.COST_MISMATCH, f"reported cost {solution.cost} but routes cost {total}")
    if max_fleet is not None and solution.K > max_fleet:
        report(ViolationKind.FLEET, f"{solution.K} routes exceed fleet size {max_fleet}")
    return out


# ---------------------------------------------------------------------------
# multi-depot covering tour VRP
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MdctvrpInstance:
    """Directed multi-depot covering tour VRP.

    Nodes are numbered depots first (0..nd-1) then customers (nd..nd+nc-1);
    ``covered_by`` and ``allocation`` use customer indices 0..nc-1.
    ``allocation[(u, v)]`` is the cost of servicing u through v.
    """

    name: str
    depot_coords: np.ndarray
    customer_coords: np.ndarray
    demand: np.ndarray
    capacity: int
    depot_capacity: float
    fleet: Tuple[int, ...]
    covered_by: Tuple[Tuple[int, ...], ...]
    allocation: Dict[Tuple[int, int], float]
    metric: Metric = Metric.EXACT

    dist: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        dc = np.asarray(self.depot_coords, dtype=float).reshape(-1, 2)
        cc = np.asarray(self.customer_coords, dtype=float).reshape(-1, 2)
        demand = np.asarray(self.demand, dtype=np.int64).reshape(-1)
        nc = len(cc)
        if len(dc) == 0:
            raise ValueError("at least one depot required")
        if len(demand) != nc or len(self.covered_by) != nc:
            raise ValueError("one demand and cover set per customer required")
        if (demand <= 0).any():
            raise ValueError("customer demands must be positive")
        if len(self.fleet) != len(dc) or any(p <= 0 for p in self.fleet):
            raise ValueError("one positive fleet size per depot required")
        cov = tuple(tuple(sorted(int(v) for v in c)) for c in self.covered_by)
        alloc = {}
        for u, c in enumerate(cov):
            if u not in c:
                raise ValueError(f"customer {u} must cover itself")
            for v in c:
                if not 0 <= v < nc:
                    raise ValueError(f"cover set of customer {u} holds invalid customer {v}")
                if v != u and (u, v) not in self.allocation:
                    raise ValueError(f"missing allocation cost for ({u}, {v})")
                alloc[(u, v)] = float(self.allocation.get((u, v), 0.0))
        extra = set(self.allocation) - set(alloc)
        if extra:
            raise ValueError(f"allocation costs given outside cover sets: {sorted(extra)[:5]}")
        object.__setattr__(self, "depot_coords", dc)
        object.__setattr__(self, "customer_coords", cc)
        object.__setattr__(self, "demand", demand)
        object.__setattr__(self, "covered_by", cov)
        object.__setattr__(self, "allocation", alloc)
        object.__setattr__(self, "fleet", tuple(int(p) for p in self.fleet))
        object.__setattr__(self, "metric", Metric(self.metric))
        object.__setattr__(self, "dist", distance_matrix(np.vstack([dc, cc]), self.metric))

    @property
    def n_depots(self) -> int:
        return len(self.depot_coords)

    @property
    def n_customers(self) -> int:
        return len(self.customer_coords)

    def node(self, customer: int) -> int:
        return self.n_depots + customer

    def is_depot(self, node: int) -> bool:
        return node < self.n_depots

    def label(self, node: int) -> str:
        if self.is_depot(node):
            return f"d{node + 1}"
        return f"c{node - self.n_depots + 1}"

    def __eq__(self, other):
        if not isinstance(other, MdctvrpInstance):
            return NotImplemented
        return (
            self.name == other.name
            and np.array_equal(self.depot_coords, other.depot_coords)
            and np.array_equal(self.customer_coords, other.customer_coords)
            and np.array_equal(self.demand, other.demand)
            and self.capacity == other.capacity
            and self.depot_capacity == other.depot_capacity
            and self.fleet == other.fleet
            and self.covered_by == other.covered_by
            and self.allocation == other.allocation
            and self.metric == other.metric
        )

    __hash__ = None


@dataclass
class MdctvrpSolution:
    """Routes as node sequences (first and last node should be the same depot)
    plus the customer service map u -> v (customer indices)."""

    routes: List[List[int]]
    serviced: Dict[int, int]
    cost: float


def mdctvrp_cost(instance: MdctvrpInstance, routes: List[List[int]], serviced: Dict[int, int]) -> float:
    d = instance.dist
    travel = sum(d[a, b] for r in routes for a, b in zip(r, r[1:]))
    return float(travel + sum(instance.allocation[(u, v)] for u, v in serviced.items()))


def validate_mdctvrp(instance: MdctvrpInstance, solution: MdctvrpSolution) -> List[Violation]:
    out: List[Violation] = []
    nd = instance.n_depots
    seen = set()
    route_of: Dict[int, int] = {}
    depot_load = [0] * nd
    depot_routes = [0] * nd
    for k, r in enumerate(solution.routes):
        if len(r) < 3 or not instance.is_depot(r[0]) or r[0] != r[-1]:
            out.append(Violation(ViolationKind.NOT_A_CYCLE, f"route {k} does not close at its starting depot"))
            continue
        interior = r[1:-1]
        if any(instance.is_depot(v) for v in interior):
            out.append(Violation(ViolationKind.NOT_A_CYCLE, f"route {k} passes through a depot"))
        for v in interior:
            c = v - nd
            if c in seen:
                out.append(Violation(ViolationKind.DUPLICATE_VISIT, f"customer {c} visited twice"))
            seen.add(c)
            route_of[c] = k
        depot_routes[r[0]] += 1
    loads = [0] * len(solution.routes)
    for u in range(instance.n_customers):
        v = solution.serviced.get(u)
        if v is None:
            out.append(Violation(ViolationKind.COVERAGE, f"customer {u} is not serviced"))
            continue
        if v not in instance.covered_by[u]:
            out.append(Violation(ViolationKind.SERVICE_OUTSIDE_COVER, f"customer {u} serviced by non-covering {v}"))
        if v not in route_of:
            out.append(Violation(ViolationKind.SERVICE_OUTSIDE_COVER, f"customer {u} serviced by unvisited {v}"))
            continue
        loads[route_of[v]] += int(instance.demand[u])
    for c in seen:
        if solution.serviced.get(c) != c:
            out.append(Violation(ViolationKind.SERVICE_OUTSIDE_COVER, f"visited customer {c} does not service itself"))
    for k, r in enumerate(solution.routes):
        if loads[k] > instance.capacity:
            out.append(Violation(ViolationKind.CAPACITY, f"route {k} load {loads[k]} exceeds {instance.capacity}"))
        if r and instance.is_depot(r[0]):
            depot_load[r[0]] += loads[k]
    for k in range(nd):
        if depot_load[k] > instance.depot_capacity + COST_TOL:
            out.append(Violation(ViolationKind.CAPACITY, f"depot {k} load {depot_load[k]} exceeds {instance.depot_capacity}"))
        if depot_routes[k] > instance.fleet[k]:
            out.append(Violation(ViolationKind.FLEET, f"depot {k} uses {depot_routes[k]} vehicles"))
    total = mdctvrp_cost(instance, solution.routes, solution.serviced)
    if not math.isclose(total, solution.cost, rel_tol=0.0, abs_tol=COST_TOL):
        out.append(Violation(ViolationKind.COST_MISMATCH, f"reported cost {solution.cost} but computed {total}"))
    return out
