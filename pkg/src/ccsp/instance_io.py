"""Reading and writing instance/solution files and generating CCSP instances
from CVRP benchmark files.

All formats are TSPLIB-like: ``KEY : value`` header lines followed by
``*_SECTION`` blocks and a final ``EOF``.  Ids on disk are 1-based.

CCSP files add ``COVER_SECTION`` with one line ``v : v a b ...`` per non-depot
vertex listing its cover set D(v) explicitly.  ``EDGE_WEIGHT_TYPE`` is
``EUC_2D`` (rounded euclidean) or ``EXACT_2D`` (real euclidean).

MDCTVRP files::

    NAME : toy
    TYPE : MDCTVRP
    EDGE_WEIGHT_TYPE : EXACT_2D
    CAPACITY : 150
    DEPOT_CAPACITY : 300
    COVERAGE_COEFFICIENT : 0.5       (optional)
    DEPOT_SECTION                    id x y fleet
    CUSTOMER_SECTION                 id x y demand
    COVER_SECTION                    u : v ...   (C(u), must contain u)
    ALLOCATION_SECTION               u v cost    (servicing u through v)
    EOF

When ``ALLOCATION_SECTION`` omits a pair (u, v) with v in C(u), v != u, its
cost is ``COVERAGE_COEFFICIENT * c(u, v)``; without a coefficient the pair is
an error.  Self service costs nothing unless listed.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import (
    CcspInstance,
    InfeasibleInstanceError,
    MdctvrpInstance,
    MdctvrpSolution,
    Metric,
    Route,
    Solution,
    distance_matrix,
    mdctvrp_cost,
    route_cost,
)

WEIGHT_TYPES = {"EUC_2D": Metric.ROUNDED, "EXACT_2D": Metric.EXACT}
WEIGHT_NAMES = {m: k for k, m in WEIGHT_TYPES.items()}
DEFAULT_FRACTIONS = (0.10, 0.20, 0.40)
DEFAULT_COVER_SIZES = (7, 9, 11)


class ParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class CvrpSource:
    name: str
    dimension: int
    capacity: int
    coords: np.ndarray
    demand: np.ndarray
    depot: int
    metric: Metric = Metric.ROUNDED


@dataclass(frozen=True)
class GenerationParams:
    demand_fraction: float
    cover_size: int

    def __post_init__(self):
        if not 0 < self.demand_fraction <= 1:
            raise ValueError("demand_fraction must lie in (0, 1]")
        if self.cover_size < 1:
            raise ValueError("cover_size must be at least 1")


# ---------------------------------------------------------------------------
# generic TSPLIB-style reader
# ---------------------------------------------------------------------------

_KEY = re.compile(r"^([A-Z][A-Z0-9_]*)\s*(?::\s*(.*))?$")


def _fmt(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def _split(text: str):
    """Return (headers, sections); section entries are (lineno, tokens)."""
    headers: Dict[str, Tuple[int, str]] = {}
    sections: Dict[str, List[Tuple[int, List[str]]]] = {}
    current = None
    saw_eof = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        m = _KEY.match(line)
        if m:
            key, value = m.group(1), m.group(2)
            if key == "EOF":
                saw_eof = True
                break
            if key.endswith("_SECTION"):
                if key in sections:
                    raise ParseError(f"duplicate {key}", lineno)
                current = key
                sections[key] = []
                continue
            if value is None:
                raise ParseError(f"malformed header line {line!r}", lineno)
            headers[key] = (lineno, value.strip())
            current = None
            continue
        if current is None:
            raise ParseError(f"data outside of a section: {line!r}", lineno)
        sections[current].append((lineno, line.replace(":", " : ").split()))
    return headers, sections, saw_eof


def _int(tok: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"expected an integer, got {tok!r}", lineno) from None


def _float(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"expected a number, got {tok!r}", lineno) from None


def _header(headers, key, conv=str, required=True):
    if key not in headers:
        if required:
            raise ParseError(f"missing {key}")
        return None
    lineno, value = headers[key]
    if conv is int:
        return _int(value, lineno)
    if conv is float:
        return _float(value, lineno)
    return value


def _section(sections, key):
    if key not in sections:
        raise ParseError(f"missing {key}")
    return sections[key]


def _metric(headers) -> Metric:
    lineno, value = headers.get("EDGE_WEIGHT_TYPE", (None, "EUC_2D"))
    if value not in WEIGHT_TYPES:
        raise ParseError(f"unsupported EDGE_WEIGHT_TYPE {value}", lineno)
    return WEIGHT_TYPES[value]


def _indexed_rows(rows, n, width, what):
    """Rows of ``id v1 .. v_width`` keyed by 1-based id -> 0-based array."""
    if len(rows) != n:
        raise ParseError(f"DIMENSION is {n} but {what} has {len(rows)} lines", rows[-1][0] if rows else None)
    out = [None] * n
    for lineno, toks in rows:
        if len(toks) != width + 1:
            raise ParseError(f"{what} line needs {width + 1} fields", lineno)
        i = _int(toks[0], lineno)
        if not 1 <= i <= n or out[i - 1] is not None:
            raise ParseError(f"bad or repeated id {i} in {what}", lineno)
        out[i - 1] = [_float(t, lineno) for t in toks[1:]]
    return out


def _depot(sections, n) -> int:
    ids = []
    for lineno, toks in _section(sections, "DEPOT_SECTION"):
        for t in toks:
            i = _int(t, lineno)
            if i == -1:
                break
            if not 1 <= i <= n:
                raise ParseError(f"depot id {i} out of range", lineno)
            ids.append(i - 1)
    if len(ids) != 1:
        raise ParseError(f"expected exactly one depot, found {len(ids)}")
    return ids[0]


def parse_cvrp(text: str) -> CvrpSource:
    headers, sections, _ = _split(text)
    name = _header(headers, "NAME")
    n = _header(headers, "DIMENSION", int)
    capacity = _header(headers, "CAPACITY", int)
    metric = _metric(headers)
    coords = np.array(_indexed_rows(_section(sections, "NODE_COORD_SECTION"), n, 2, "NODE_COORD_SECTION"))
    demand = np.array(_indexed_rows(_section(sections, "DEMAND_SECTION"), n, 1, "DEMAND_SECTION"))[:, 0]
    depot = _depot(sections, n)
    demand = demand.astype(np.int64)
    demand[depot] = 0
    return CvrpSource(name, n, capacity, coords, demand, depot, metric)


def read_cvrp_file(path) -> CvrpSource:
    with open(path, encoding="utf-8") as fh:
        return parse_cvrp(fh.read())


def write_cvrp(src: CvrpSource) -> str:
    lines = [
        f"NAME : {src.name}",
        "TYPE : CVRP",
        f"DIMENSION : {src.dimension}",
        f"EDGE_WEIGHT_TYPE : {WEIGHT_NAMES[src.metric]}",
        f"CAPACITY : {src.capacity}",
        "NODE_COORD_SECTION",
    ]
    lines += [f"{i + 1} {_fmt(x)} {_fmt(y)}" for i, (x, y) in enumerate(src.coords)]
    lines.append("DEMAND_SECTION")
    lines += [f"{i + 1} {int(d)}" for i, d in enumerate(src.demand)]
    lines += ["DEPOT_SECTION", str(src.depot + 1), "-1", "EOF"]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# CCSP generation
# ---------------------------------------------------------------------------


def nearest_cover_sets(dist: np.ndarray, candidates: Sequence[int], cover_size: int) -> Dict[int, Tuple[int, ...]]:
    """D(v) = v followed by its cover_size-1 nearest candidates (ties: lower id)."""
    cand = np.asarray(sorted(candidates))
    out = {}
    for v in cand:
        others = cand[cand != v]
        order = np.lexsort((others, dist[v, others]))
        out[int(v)] = (int(v),) + tuple(int(u) for u in others[order[: cover_size - 1]])
    return out


def preprocess(covers: Dict[int, Tuple[int, ...]], demand_set) -> Dict[int, Tuple[int, ...]]:
    """Drop vertices whose cover set holds no demand vertex, and drop them from
    the remaining cover sets."""
    keep = {v for v, d in covers.items() if any(u in demand_set for u in d)}
    return {v: tuple(u for u in d if u in keep) for v, d in covers.items() if v in keep}


def _base_name(name: str) -> str:
    return re.sub(r"-k\d+$", "", name)


def generate_ccsp(src: CvrpSource, params: GenerationParams) -> CcspInstance:
    n = src.dimension
    k = int(math.floor(params.demand_fraction * n + 1e-9))
    if k < 1:
        raise ValueError(f"demand fraction {params.demand_fraction} selects no vertex of {n}")
    others = [v for v in range(n) if v != src.depot]
    if k > len(others):
        raise ValueError("more demand vertices requested than customers available")
    demand_set = set(others[:k])
    demand = np.zeros(n, dtype=np.int64)
    for v in demand_set:
        demand[v] = src.demand[v]

    dist = distance_matrix(np.asarray(src.coords, dtype=float), src.metric)
    covers = preprocess(nearest_cover_sets(dist, others, params.cover_size), demand_set)
    kept = sorted(set(covers) | {src.depot})
    removed = n - len(kept)
    new_id = {old: i for i, old in enumerate(kept)}
    new_covers = [()] * len(kept)
    for v, d in covers.items():
        new_covers[new_id[v]] = tuple(new_id[u] for u in d)

    return CcspInstance(
        name=f"{_base_name(src.name)}-w{k}-c{params.cover_size}",
        coords=np.asarray(src.coords, dtype=float)[kept],
        demand=demand[kept],
        capacity=src.capacity,
        covers=tuple(new_covers),
        depot=new_id[src.depot],
        metric=src.metric,
        comment=f"from {src.name}; {removed} vertices without demand in their cover set removed",
    )


def random_ccsp(
    rng: np.random.Generator,
    n_customers: int,
    n_demand: int,
    cover_size: int = 3,
    vehicles: int = 1,
    metric: Metric = Metric.EXACT,
    scale: float = 100.0,
    name: str = "rand",
) -> CcspInstance:
    """Small random instance; Q is set so that about ``vehicles`` routes are needed."""
    n = n_customers + 1
    coords = rng.integers(0, int(scale), size=(n, 2)).astype(float)
    demand = np.zeros(n, dtype=np.int64)
    dv = rng.choice(np.arange(1, n), size=n_demand, replace=False)
    demand[dv] = rng.integers(1, 11, size=n_demand)
    capacity = int(max(demand.max(), math.ceil(demand.sum() / vehicles)))
    dist = distance_matrix(coords, metric)
    covers = preprocess(nearest_cover_sets(dist, range(1, n), cover_size), set(int(v) for v in dv))
    kept = sorted(set(covers) | {0})
    new_id = {old: i for i, old in enumerate(kept)}
    new_covers = [()] * len(kept)
    for v, d in covers.items():
        new_covers[new_id[v]] = tuple(new_id[u] for u in d)
    return CcspInstance(name, coords[kept], demand[kept], capacity, tuple(new_covers), 0, metric)


# ---------------------------------------------------------------------------
# CCSP files
# ---------------------------------------------------------------------------


def write_ccsp(instance: CcspInstance) -> str:
    lines = [f"NAME : {instance.name}", "TYPE : CCSP"]
    if instance.comment:
        lines.append(f"COMMENT : {instance.comment}")
    lines += [
        f"DIMENSION : {instance.n}",
        f"EDGE_WEIGHT_TYPE : {WEIGHT_NAMES[instance.metric]}",
        f"CAPACITY : {instance.capacity}",
        "NODE_COORD_SECTION",
    ]
    lines += [f"{i + 1} {_fmt(x)} {_fmt(y)}" for i, (x, y) in enumerate(instance.coords)]
    lines.append("DEMAND_SECTION")
    lines += [f"{i + 1} {int(d)}" for i, d in enumerate(instance.demand)]
    lines += ["DEPOT_SECTION", str(instance.depot + 1), "-1", "COVER_SECTION"]
    for v in instance.customers:
        lines.append(f"{v + 1} : " + " ".join(str(u + 1) for u in instance.covers[v]))
    lines.append("EOF")
    return "\n".join(lines) + "\n"


def read_ccsp(text: str) -> CcspInstance:
    headers, sections, _ = _split(text)
    if "COVER_SECTION" not in sections:
        raise ParseError("missing COVER_SECTION")
    name = _header(headers, "NAME")
    n = _header(headers, "DIMENSION", int)
    capacity = _header(headers, "CAPACITY", int)
    comment = _header(headers, "COMMENT", required=False) or ""
    metric = _metric(headers)
    coords = np.array(_indexed_rows(_section(sections, "NODE_COORD_SECTION"), n, 2, "NODE_COORD_SECTION"))
    demand = np.array(_indexed_rows(_section(sections, "DEMAND_SECTION"), n, 1, "DEMAND_SECTION"))[:, 0]
    depot = _depot(sections, n)
    covers: List[Tuple[int, ...]] = [()] * n
    seen = set()
    for lineno, toks in sections["COVER_SECTION"]:
        if len(toks) < 3 or toks[1] != ":":
            raise ParseError("cover line must read 'v : u1 u2 ...'", lineno)
        v = _int(toks[0], lineno) - 1
        if not 0 <= v < n or v == depot or v in seen:
            raise ParseError(f"bad or repeated cover id {v + 1}", lineno)
        seen.add(v)
        covers[v] = tuple(_int(t, lineno) - 1 for t in toks[2:])
    missing = [v + 1 for v in range(n) if v != depot and v not in seen]
    if missing:
        raise ParseError(f"COVER_SECTION lacks vertices {missing[:10]}")
    try:
        return CcspInstance(name, coords, demand.astype(np.int64), capacity, tuple(covers), depot, metric, comment)
    except InfeasibleInstanceError:
        raise
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def read_ccsp_file(path) -> CcspInstance:
    with open(path, encoding="utf-8") as fh:
        return read_ccsp(fh.read())


def write_ccsp_file(instance: CcspInstance, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(write_ccsp(instance))


# ---------------------------------------------------------------------------
# MDCTVRP files
# ---------------------------------------------------------------------------


def read_mdctvrp(text: str) -> MdctvrpInstance:
    headers, sections, _ = _split(text)
    name = _header(headers, "NAME")
    capacity = _header(headers, "CAPACITY", int)
    if "DEPOT_CAPACITY" not in headers:
        raise ParseError("depot capacity required (DEPOT_CAPACITY)")
    depot_capacity = _header(headers, "DEPOT_CAPACITY", float)
    coef = _header(headers, "COVERAGE_COEFFICIENT", float, required=False)
    metric = _metric(headers)

    def rows(key, width):
        raw = _section(sections, key)
        return _indexed_rows(raw, len(raw), width, key)

    depots = rows("DEPOT_SECTION", 3)
    customers = rows("CUSTOMER_SECTION", 3)
    nc = len(customers)
    cover: List[Optional[Tuple[int, ...]]] = [None] * nc
    for lineno, toks in _section(sections, "COVER_SECTION"):
        if len(toks) < 3 or toks[1] != ":":
            raise ParseError("cover line must read 'u : v1 v2 ...'", lineno)
        u = _int(toks[0], lineno) - 1
        if not 0 <= u < nc or cover[u] is not None:
            raise ParseError(f"bad or repeated customer id {u + 1}", lineno)
        cover[u] = tuple(_int(t, lineno) - 1 for t in toks[2:])
    for u in range(nc):
        if cover[u] is None:
            cover[u] = (u,)

    alloc: Dict[Tuple[int, int], float] = {}
    for lineno, toks in sections.get("ALLOCATION_SECTION", []):
        if len(toks) != 3:
            raise ParseError("allocation line must read 'u v cost'", lineno)
        alloc[(_int(toks[0], lineno) - 1, _int(toks[1], lineno) - 1)] = _float(toks[2], lineno)
    ccoords = np.array([c[:2] for c in customers], dtype=float)
    if coef is not None:
        cd = distance_matrix(ccoords, metric)
        for u, c in enumerate(cover):
            for v in c:
                if v != u and (u, v) not in alloc and 0 <= v < nc:
                    alloc[(u, v)] = coef * float(cd[u, v])
    try:
        return MdctvrpInstance(
            name=name,
            depot_coords=np.array([d[:2] for d in depots], dtype=float),
            customer_coords=ccoords,
            demand=np.array([c[2] for c in customers]).astype(np.int64),
            capacity=capacity,
            depot_capacity=depot_capacity,
            fleet=tuple(int(d[2]) for d in depots),
            covered_by=tuple(cover),
            allocation=alloc,
            metric=metric,
        )
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def write_mdctvrp(instance: MdctvrpInstance) -> str:
    lines = [
        f"NAME : {instance.name}",
        "TYPE : MDCTVRP",
        f"EDGE_WEIGHT_TYPE : {WEIGHT_NAMES[instance.metric]}",
        f"CAPACITY : {instance.capacity}",
        f"DEPOT_CAPACITY : {_fmt(instance.depot_capacity)}",
        "DEPOT_SECTION",
    ]
    lines += [f"{k + 1} {_fmt(x)} {_fmt(y)} {p}" for k, ((x, y), p) in enumerate(zip(instance.depot_coords, instance.fleet))]
    lines.append("CUSTOMER_SECTION")
    lines += [f"{i + 1} {_fmt(x)} {_fmt(y)} {int(d)}" for i, ((x, y), d) in enumerate(zip(instance.customer_coords, instance.demand))]
    lines.append("COVER_SECTION")
    lines += [f"{u + 1} : " + " ".join(str(v + 1) for v in c) for u, c in enumerate(instance.covered_by)]
    lines.append("ALLOCATION_SECTION")
    for (u, v), cost in sorted(instance.allocation.items()):
        if u != v or cost != 0.0:
            lines.append(f"{u + 1} {v + 1} {_fmt(cost)}")
    lines.append("EOF")
    return "\n".join(lines) + "\n"


def read_mdctvrp_file(path) -> MdctvrpInstance:
    with open(path, encoding="utf-8") as fh:
        return read_mdctvrp(fh.read())


# ---------------------------------------------------------------------------
# solution files
# ---------------------------------------------------------------------------
#
#   NAME : <instance name>
#   COST : <total cost>
#   route 1 5 9 1          (1-based vertex ids, depot first and last)
#   serve 9 by 5           (demand 9 serviced through vertex 5)
#   EOF
#
# A serve line belongs to the route that visits its servicing vertex.


def write_solution(instance_name: str, solution: Solution) -> str:
    lines = [f"NAME : {instance_name}", f"COST : {_fmt(solution.cost)}"]
    for r in solution.routes:
        lines.append("route " + " ".join(str(v + 1) for v in r.nodes))
    for r in solution.routes:
        for u, v in sorted(r.serviced.items()):
            lines.append(f"serve {u + 1} by {v + 1}")
    lines.append("EOF")
    return "\n".join(lines) + "\n"


def read_solution(text: str, instance: Optional[CcspInstance] = None) -> Tuple[str, Solution]:
    """Parse a solution file; returns (instance name, solution).

    If the file has no COST line the cost is recomputed from ``instance``.
    """
    name, cost = "", None
    routes: List[Route] = []
    serves: List[Tuple[int, int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "EOF":
            break
        toks = line.split()
        head = toks[0]
        if head == "NAME":
            name = line.split(":", 1)[1].strip()
        elif head == "COST":
            cost = _float(line.split(":", 1)[1].strip(), lineno)
        elif head == "route":
            routes.append(Route([_int(t, lineno) - 1 for t in toks[1:]]))
        elif head == "serve":
            if len(toks) != 4 or toks[2] != "by":
                raise ParseError("serve line must read 'serve u by v'", lineno)
            serves.append((lineno, _int(toks[1], lineno) - 1, _int(toks[3], lineno) - 1))
        else:
            raise ParseError(f"unknown line {line!r}", lineno)
    if instance is not None:
        ids = [v for r in routes for v in r.nodes] + [x for _, u, v in serves for x in (u, v)]
        bad = sorted({v + 1 for v in ids if not 0 <= v < instance.n})
        if bad:
            raise ParseError(f"vertex ids {bad[:5]} outside 1..{instance.n} of instance {instance.name}")
    where = {}
    for k, r in enumerate(routes):
        for v in r.nodes[1:-1]:
            where.setdefault(v, k)
    for lineno, u, v in serves:
        if v not in where:
            raise ParseError(f"servicing vertex {v + 1} is on no route", lineno)
        routes[where[v]].serviced[u] = v
    if cost is None:
        if instance is None:
            raise ParseError("missing COST")
        cost = sum(route_cost(instance, r) for r in routes)
    return name, Solution(routes, cost)


# MDCTVRP solutions use node labels: "route d1 c4 c2 d1", "serve c3 by c4".


def write_mdctvrp_solution(instance: MdctvrpInstance, solution: MdctvrpSolution) -> str:
    lines = [f"NAME : {instance.name}", f"COST : {_fmt(solution.cost)}"]
    for r in solution.routes:
        lines.append("route " + " ".join(instance.label(v) for v in r))
    nd = instance.n_depots
    for u, v in sorted(solution.serviced.items()):
        lines.append(f"serve {instance.label(nd + u)} by {instance.label(nd + v)}")
    lines.append("EOF")
    return "\n".join(lines) + "\n"


def _node_of_label(instance: MdctvrpInstance, tok: str, lineno: int) -> int:
    if len(tok) < 2 or tok[0] not in "dc":
        raise ParseError(f"bad node label {tok!r}", lineno)
    k = _int(tok[1:], lineno) - 1
    limit = instance.n_depots if tok[0] == "d" else instance.n_customers
    if not 0 <= k < limit:
        raise ParseError(f"node label {tok!r} out of range", lineno)
    return k if tok[0] == "d" else instance.n_depots + k


def read_mdctvrp_solution(text: str, instance: MdctvrpInstance) -> Tuple[str, MdctvrpSolution]:
    name, cost = "", None
    routes: List[List[int]] = []
    serviced: Dict[int, int] = {}
    nd = instance.n_depots
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "EOF":
            break
        toks = line.split()
        if toks[0] == "NAME":
            name = line.split(":", 1)[1].strip()
        elif toks[0] == "COST":
            cost = _float(line.split(":", 1)[1].strip(), lineno)
        elif toks[0] == "route":
            routes.append([_node_of_label(instance, t, lineno) for t in toks[1:]])
        elif toks[0] == "serve":
            if len(toks) != 4 or toks[2] != "by":
                raise ParseError("serve line must read 'serve cU by cV'", lineno)
            u = _node_of_label(instance, toks[1], lineno) - nd
            v = _node_of_label(instance, toks[3], lineno) - nd
            if u < 0 or v < 0:
                raise ParseError("only customers serve and are served", lineno)
            serviced[u] = v
        else:
            raise ParseError(f"unknown line {line!r}", lineno)
    if cost is None:
        cost = mdctvrp_cost(instance, routes, serviced)
    return name, MdctvrpSolution(routes, serviced, cost)


def instance_type(text: str) -> str:
    """Value of the TYPE header ('CVRP', 'CCSP', 'MDCTVRP', ...), upper-cased."""
    for raw in text.splitlines():
        m = _KEY.match(raw.strip())
        if m and m.group(1) == "TYPE":
            return (m.group(2) or "").strip().upper()
        if m and m.group(1).endswith("_SECTION"):
            break
    return ""
