"""Solution pipelines for each methodology and the run records they produce."""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional, Tuple, Union

from . import brkga
from .core import CcspInstance, MdctvrpInstance, MdctvrpSolution, Solution, validate, validate_mdctvrp
from .local_search import MoveSet, improve_route, improve_solution
from .matheuristic import DEFAULT_POOL_LIMIT, PooledRoute, RoutePool, enumerate_small_routes, exact_ccsp, harvest_elite_routes, solve_cover_packing
from .mip import (
    Limits,
    build_ccsp1,
    build_mdctvrp,
    ccsp_separator,
    cutting_plane_solve,
    decode_ccsp,
    decode_mdctvrp,
    encode_ccsp,
    make_backend,
    mdctvrp_separator,
)

METHODS = ("ccsp1", "brkga", "ccsp1-warm", "matheuristic", "mdctvrp-m", "exact-oracle")


@dataclass
class RunRecord:
    instance: str
    method: str
    upper_bound: Optional[float]
    lower_bound: Optional[float]
    wall_time: float
    seed: int
    params: Dict[str, Any] = field(default_factory=dict)
    status: str = "ok"
    info: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown methodology {self.method!r}")
        ub, lb = self.upper_bound, self.lower_bound
        if ub is not None and lb is not None and math.isfinite(ub) and lb > ub + 1e-6:
            raise ValueError(f"lower bound {lb} exceeds upper bound {ub}")

    def to_json(self) -> str:
        def clean(x):
            return None if isinstance(x, float) and not math.isfinite(x) else x

        d = asdict(self)
        d["upper_bound"] = clean(d["upper_bound"])
        d["lower_bound"] = clean(d["lower_bound"])
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls(**json.loads(text))

    def comparable(self) -> Dict[str, Any]:
        """Record without wall time, for determinism checks."""
        d = asdict(self)
        d.pop("wall_time")
        return d


@dataclass
class SolveConfig:
    brkga: brkga.BrkgaParams = field(default_factory=brkga.BrkgaParams)
    moves: MoveSet = field(default_factory=MoveSet)
    pool_limit: int = DEFAULT_POOL_LIMIT
    backend: Optional[str] = None  # None / 'bnb', 'highs', or an adapter command
    time_limit: Optional[float] = None  # for exact stages
    improve_archive: bool = False

    def snapshot(self) -> Dict[str, Any]:
        return {
            "brkga": self.brkga.as_dict(),
            "moves": sorted(self.moves.moves),
            "pool_limit": self.pool_limit,
            "backend": self.backend or "bnb",
            "time_limit": self.time_limit,
            "improve_archive": self.improve_archive,
        }


def brkga_pipeline(instance: CcspInstance, cfg: SolveConfig) -> Tuple[Solution, brkga.BrkgaResult]:
    """Evolve, then polish the best solution's routes with local search."""
    res = brkga.run(instance, cfg.brkga)
    return improve_solution(res.best, instance, cfg.moves), res


def matheuristic_pipeline(instance: CcspInstance, cfg: SolveConfig):
    """BRKGA, then an exact cover/packing solve over small routes + elite routes.

    The polished BRKGA solution's routes enter the pool first after the small
    routes and are passed as the starting incumbent, so the result is never
    worse than the BRKGA solution.
    """
    best, res = brkga_pipeline(instance, cfg)
    pool = RoutePool(cfg.pool_limit)
    pool.extend(enumerate_small_routes(instance))
    start_idx = []
    for r in best.routes:
        pr = PooledRoute.from_route(r, instance)
        seq = pr.nodes
        key = (min(seq, seq[::-1]), pr.serviced)
        if pool.add(pr):
            start_idx.append(len(pool) - 1)
        else:
            found = next((i for i, q in enumerate(pool.routes) if (min(q.nodes, q.nodes[::-1]), q.serviced) == key), None)
            start_idx.append(found)
    incumbent = start_idx if None not in start_idx else None
    archive = res.archive.newest_first() if res.archive is not None else []
    if cfg.improve_archive:
        archive = [improve_route(r, instance, cfg.moves) for r in archive]
    harvest_elite_routes(archive, pool, instance)
    backend = make_backend(cfg.backend) if cfg.backend not in (None, "bnb") else None
    cover = solve_cover_packing(pool, instance, backend=backend, time_limit=cfg.time_limit, incumbent=incumbent)
    sol = improve_solution(cover.solution, instance, cfg.moves)
    if sol.cost > best.cost + 1e-9:
        sol = best
    return sol, res, pool, cover


def _ccsp_cut_loop(instance: CcspInstance, cfg: SolveConfig, warm: Optional[Solution]):
    model = build_ccsp1(instance)
    incumbent = encode_ccsp(warm, instance) if warm is not None else None
    out = cutting_plane_solve(model, ccsp_separator(instance), make_backend(cfg.backend),
                              Limits(time_limit=cfg.time_limit), incumbent=incumbent)
    sol = decode_ccsp(out.values, instance) if out.values is not None else None
    return sol, out


def solve(instance: Union[CcspInstance, MdctvrpInstance], method: str, cfg: Optional[SolveConfig] = None,
          ) -> Tuple[RunRecord, Optional[Union[Solution, MdctvrpSolution]]]:
    """Run one methodology and re-validate its solution.

    ``record.status`` is 'ok', 'limit' (time or iteration limit reached),
    'infeasible', or 'invalid' when validation found violations.
    """
    cfg = cfg or SolveConfig()
    if method not in METHODS:
        raise ValueError(f"unknown methodology {method!r}; choose from {', '.join(METHODS)}")
    if (method == "mdctvrp-m") != isinstance(instance, MdctvrpInstance):
        raise ValueError(f"methodology {method} does not apply to instance {instance.name}")
    t0 = time.perf_counter()
    lb = None
    status = "ok"
    info: Dict[str, Any] = {}
    sol = None
    if method == "brkga":
        sol, res = brkga_pipeline(instance, cfg)
        info.update(generations=res.generations, brkga_best=res.best_fitness)
    elif method == "matheuristic":
        sol, res, pool, cover = matheuristic_pipeline(instance, cfg)
        info.update(generations=res.generations, pool_size=len(pool), cover_optimal=cover.optimal)
        if not cover.optimal:
            status = "limit"
    elif method in ("ccsp1", "ccsp1-warm"):
        warm = None
        if method == "ccsp1-warm":
            warm, res = brkga_pipeline(instance, cfg)
            info.update(generations=res.generations, warm_start=warm.cost)
        sol, out = _ccsp_cut_loop(instance, cfg, warm)
        lb = out.lower_bound if math.isfinite(out.lower_bound) else None
        info.update(cuts=out.cuts, iterations=out.iterations, gap=out.gap)
        status = {"optimal": "ok", "limit": "limit", "infeasible": "infeasible"}[out.status]
    elif method == "mdctvrp-m":
        model = build_mdctvrp(instance)
        out = cutting_plane_solve(model, mdctvrp_separator(instance), make_backend(cfg.backend),
                                  Limits(time_limit=cfg.time_limit))
        sol = decode_mdctvrp(out.values, instance) if out.values is not None else None
        lb = out.lower_bound if math.isfinite(out.lower_bound) else None
        info.update(cuts=out.cuts, iterations=out.iterations, gap=out.gap)
        status = {"optimal": "ok", "limit": "limit", "infeasible": "infeasible"}[out.status]
    elif method == "exact-oracle":
        sol = exact_ccsp(instance, time_limit=cfg.time_limit)
        lb = sol.cost
    ub = None
    if sol is not None:
        if isinstance(instance, MdctvrpInstance):
            violations = validate_mdctvrp(instance, sol)
        else:
            violations = validate(instance, sol)
        if violations:
            status = "invalid"
            info["violations"] = [str(v) for v in violations]
        ub = sol.cost
    if lb is not None and ub is not None:
        lb = min(lb, ub)
    seed = cfg.brkga.seed
    rec = RunRecord(instance.name, method, ub, lb, time.perf_counter() - t0, seed, cfg.snapshot(), status, info)
    return rec, sol
