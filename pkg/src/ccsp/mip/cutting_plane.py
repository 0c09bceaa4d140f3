"""Lazy-constraint loop: solve, separate at the integral optimum, add the
violated rows, solve again, until the optimum is cut-feasible."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

from .backends import BranchAndBoundBackend
from .model import Constraint, MipModel

Separator = Callable[[Dict[str, float], MipModel], List[Constraint]]


@dataclass
class Limits:
    max_iterations: int = 1000
    time_limit: Optional[float] = None


@dataclass
class CuttingPlaneResult:
    values: Optional[Dict[str, float]]
    upper_bound: float
    lower_bound: float
    gap: float
    cuts: int
    iterations: int
    status: str  # optimal | limit | infeasible
    bound_history: List[float] = field(default_factory=list)
    model: Optional[MipModel] = field(default=None, repr=False)


def relative_gap(ub: float, lb: float) -> float:
    if math.isinf(ub):
        return math.inf
    if ub == 0:
        return 0.0 if lb >= -1e-9 else math.inf
    return max(0.0, (ub - lb) / abs(ub))


def _add_rows(model: MipModel, cuts: List[Constraint]) -> None:
    for cut in cuts:
        name = cut.name
        k = 1
        while model.has_constraint(name):
            name = f"{cut.name}_{k}"
            k += 1
        model.add_constraint(name, cut.coeffs, cut.sense, cut.rhs)


def cutting_plane_solve(
    model: MipModel,
    separator: Separator,
    backend=None,
    limits: Limits = Limits(),
    incumbent: Optional[Dict[str, float]] = None,
) -> CuttingPlaneResult:
    """Iterate solve/separate on a copy of ``model``.

    Backends that accept a lazy callback (the built-in branch-and-bound)
    separate at every integral node of a single search instead; the outer
    loop then only confirms that the final point is cut-feasible.

    ``incumbent`` must satisfy the full model, lazy rows included; it is
    handed to the backend at every round and caps the upper bound.  The
    lower bound is the best backend bound seen (a relaxation of the full
    model at every round), so it never decreases.
    """
    backend = backend or BranchAndBoundBackend()
    work = model.copy()
    start = time.perf_counter()
    inc_obj = math.inf
    if incumbent is not None:
        if work.violations(incumbent) or separator(incumbent, work):
            raise ValueError("warm-start incumbent is infeasible for the model")
        inc_obj = work.objective_value(incumbent)
    lb = -math.inf
    history: List[float] = []
    n_cuts = 0
    iterations = 0
    while True:
        remaining = None
        if limits.time_limit is not None:
            remaining = limits.time_limit - (time.perf_counter() - start)
            if remaining <= 0:
                break
        if getattr(backend, "supports_lazy", False):
            res = backend.solve(work, time_limit=remaining, incumbent=incumbent, lazy=separator)
            _add_rows(work, res.cuts)
            n_cuts += len(res.cuts)
        else:
            res = backend.solve(work, time_limit=remaining, incumbent=incumbent)
        iterations += 1
        if res.status == "infeasible":
            return CuttingPlaneResult(None, math.inf, math.inf, math.inf, n_cuts, iterations, "infeasible", history, work)
        lb = max(lb, res.bound)
        history.append(lb)
        if res.values is None:
            break
        cuts = separator(res.values, work)
        if not cuts:
            if res.objective <= inc_obj:
                incumbent, inc_obj = res.values, res.objective
            if res.status == "optimal":
                lb = max(lb, min(res.objective, inc_obj))
                history[-1] = lb
                return CuttingPlaneResult(incumbent, inc_obj, lb, relative_gap(inc_obj, lb), n_cuts, iterations,
                                          "optimal", history, work)
            break
        _add_rows(work, cuts)
        n_cuts += len(cuts)
        if iterations >= limits.max_iterations:
            break
    lb = min(lb, inc_obj)
    return CuttingPlaneResult(incumbent, inc_obj, lb, relative_gap(inc_obj, lb), n_cuts, iterations, "limit", history, work)
