"""Solver backends.

Every backend takes a :class:`MipModel` and returns a :class:`BackendResult`
keyed by variable name, so models round-trip by name regardless of solver.

* ``BranchAndBoundBackend``: depth-first branch-and-bound over LP
  relaxations, for tiny models only; needs nothing beyond scipy.
* ``HighsBackend``: the HiGHS MIP solver shipped inside scipy.
* ``ExternalBackend``: any program invoked as ``<command> model.lp out.sol``
  that writes a solution listing (see :func:`ccsp.mip.model.import_solution`).
"""
from __future__ import annotations

import math
import os
import shlex
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .model import MipModel, export_lp, import_solution

INT_TOL = 1e-6


class BackendError(RuntimeError):
    pass


@dataclass
class BackendResult:
    status: str  # optimal | time_limit | infeasible
    values: Optional[Dict[str, float]]
    objective: float
    bound: float
    nodes: int = 0
    cuts: List = field(default_factory=list)  # lazy rows added during the solve


def _integral_objective(model: MipModel) -> bool:
    """True if every feasible objective value is an integer."""
    for name, c in model.objective.items():
        if not model.variables[name].is_integer or not float(c).is_integer():
            return False
    return True


class BranchAndBoundBackend:
    """Exact depth-first branch-and-bound on LP relaxations (HiGHS simplex via
    ``scipy.optimize.linprog``).  Branches on the most fractional integer
    variable, exploring the side nearest its LP value first."""

    name = "bnb"

    def __init__(self, max_integer_vars: int = 200, eps: float = 1e-7):
        self.max_integer_vars = max_integer_vars
        self.eps = eps

    supports_lazy = True

    def solve(self, model: MipModel, time_limit: Optional[float] = None,
              incumbent: Optional[Dict[str, float]] = None, lazy=None) -> BackendResult:
        """With ``lazy`` (values, model) -> rows, every integral node is
        separated and violated rows join the LP for the rest of the search."""
        n_int = sum(v.is_integer for v in model.variables.values())
        if n_int > self.max_integer_vars:
            raise BackendError(
                f"built-in branch-and-bound handles at most {self.max_integer_vars} integer variables, model has {n_int}"
            )
        names, c, A, lo, hi, lb, ub, integ = model.arrays()
        A = A.toarray()
        ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
        for r in range(len(lo)):
            if lo[r] == hi[r]:
                eq_rows.append(A[r])
                eq_rhs.append(lo[r])
                continue
            if np.isfinite(hi[r]):
                ub_rows.append(A[r])
                ub_rhs.append(hi[r])
            if np.isfinite(lo[r]):
                ub_rows.append(-A[r])
                ub_rhs.append(-lo[r])
        index = {n: i for i, n in enumerate(names)}
        added = []

        def add_row(con):
            row = np.zeros(len(names))
            for v, a in con.coeffs.items():
                row[index[v]] = a
            if con.sense in ("<=", "="):
                ub_rows.append(row)
                ub_rhs.append(con.rhs)
            if con.sense in (">=", "="):
                ub_rows.append(-row)
                ub_rhs.append(-con.rhs)
        A_eq = np.array(eq_rows) if eq_rows else None
        b_eq = np.array(eq_rhs) if eq_rows else None
        int_idx = np.flatnonzero(integ)
        prio = np.array([model.priorities.get(names[i], 0) for i in int_idx], dtype=float)
        integral_obj = _integral_objective(model)

        def lp(lbs, ubs):
            if not names:
                return 0.0, np.zeros(0)
            A_ub = np.array(ub_rows) if ub_rows else None
            b_ub = np.array(ub_rhs) if ub_rows else None
            res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                          bounds=np.column_stack([lbs, ubs]), method="highs")
            if res.status == 2:
                return None, None
            if res.status != 0:
                raise BackendError(f"LP relaxation failed: {res.message}")
            return float(res.fun), res.x

        def prune_level(value):
            return math.ceil(value - 1e-6) if integral_obj and math.isfinite(value) else value

        best_obj, best_x = math.inf, None
        if incumbent is not None:
            if not model.violations(incumbent):
                best_obj = model.objective_value(incumbent)
                best_x = np.array([incumbent.get(n, 0.0) for n in names])

        start = time.perf_counter()
        stack = [(lb.copy(), ub.copy(), -math.inf)]
        nodes = 0
        timed_out = False
        while stack:
            if time_limit is not None and time.perf_counter() - start > time_limit:
                timed_out = True
                break
            lbs, ubs, parent_bound = stack.pop()
            if prune_level(parent_bound) >= best_obj - self.eps:
                continue
            nodes += 1
            val, x = lp(lbs, ubs)
            if val is None or prune_level(val) >= best_obj - self.eps:
                continue
            frac = np.abs(x[int_idx] - np.round(x[int_idx]))
            if len(frac) == 0 or frac.max() <= INT_TOL:
                x = x.copy()
                x[int_idx] = np.round(x[int_idx])
                if lazy is not None:
                    cuts = lazy(dict(zip(names, map(float, x))), model)
                    if cuts:
                        for con in cuts:
                            add_row(con)
                        added.extend(cuts)
                        stack.append((lbs, ubs, val))
                        continue
                best_obj, best_x = float(c @ x), x
                continue
            # highest priority class first, most fractional within it
            score = np.where(frac > INT_TOL, prio * 10.0 + frac, -np.inf)
            j = int(int_idx[int(np.argmax(score))])
            down_ub = ubs.copy()
            down_ub[j] = math.floor(x[j])
            up_lb = lbs.copy()
            up_lb[j] = math.ceil(x[j])
            down = (lbs, down_ub, val)
            up = (up_lb, ubs, val)
            # the child pushed last is explored first
            if x[j] - math.floor(x[j]) >= 0.5:
                stack.extend([down, up])
            else:
                stack.extend([up, down])
        if timed_out:
            open_bound = min((b for _, _, b in stack), default=best_obj)
            bound = min(best_obj, max(open_bound, -math.inf))
            values = None if best_x is None else dict(zip(names, map(float, best_x)))
            return BackendResult("time_limit", values, best_obj, bound, nodes, added)
        if best_x is None:
            return BackendResult("infeasible", None, math.inf, math.inf, nodes, added)
        return BackendResult("optimal", dict(zip(names, map(float, best_x))), best_obj, best_obj, nodes, added)


class HighsBackend:
    """HiGHS through ``scipy.optimize.milp``.  Warm starts are not exposed by
    that interface, so a supplied incumbent only caps the reported objective."""

    name = "highs"

    def __init__(self, mip_rel_gap: float = 1e-9):
        self.mip_rel_gap = mip_rel_gap

    def solve(self, model: MipModel, time_limit: Optional[float] = None,
              incumbent: Optional[Dict[str, float]] = None) -> BackendResult:
        names, c, A, lo, hi, lb, ub, integ = model.arrays()
        if not names:
            return BackendResult("optimal", {}, 0.0, 0.0)
        options = {"mip_rel_gap": self.mip_rel_gap}
        if time_limit is not None:
            options["time_limit"] = max(float(time_limit), 0.01)
        cons = [LinearConstraint(A, lo, hi)] if A.shape[0] else []
        res = milp(c, constraints=cons, integrality=integ, bounds=Bounds(lb, ub), options=options)
        inc_obj = math.inf
        if incumbent is not None and not model.violations(incumbent):
            inc_obj = model.objective_value(incumbent)
        if res.status == 2:
            return BackendResult("infeasible", None, math.inf, math.inf)
        if res.status not in (0, 1):
            raise BackendError(f"HiGHS: {res.message}")
        bound = getattr(res, "mip_dual_bound", None)
        if res.x is None:
            if inc_obj < math.inf:
                return BackendResult("time_limit", dict(incumbent), inc_obj, -math.inf if bound is None else bound)
            return BackendResult("time_limit", None, math.inf, -math.inf if bound is None else bound)
        x = np.where(integ == 1, np.round(res.x), res.x)
        values = dict(zip(names, map(float, x)))
        obj = float(c @ x)
        if inc_obj < obj - 1e-9:
            values, obj = dict(incumbent), inc_obj
        status = "optimal" if res.status == 0 else "time_limit"
        if bound is None or (isinstance(bound, float) and math.isnan(bound)):
            bound = obj if status == "optimal" else -math.inf
        return BackendResult(status, values, obj, min(float(bound), obj))


class ExternalBackend:
    """Run ``<command> model.lp solution.sol`` and read the listing it writes.

    The program gets the time limit (seconds) in ``CCSP_TIME_LIMIT`` when one
    is set.  A non-zero exit raises :class:`BackendError` carrying its stderr
    verbatim.
    """

    name = "external"

    def __init__(self, command: Union[str, Sequence[str]]):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)

    def solve(self, model: MipModel, time_limit: Optional[float] = None,
              incumbent: Optional[Dict[str, float]] = None) -> BackendResult:
        with tempfile.TemporaryDirectory() as tmp:
            lp_path = os.path.join(tmp, "model.lp")
            sol_path = os.path.join(tmp, "model.sol")
            with open(lp_path, "w") as fh:
                fh.write(export_lp(model))
            env = dict(os.environ)
            if time_limit is not None:
                env["CCSP_TIME_LIMIT"] = str(time_limit)
            proc = subprocess.run(self.command + [lp_path, sol_path], capture_output=True, text=True, env=env)
            if proc.returncode != 0:
                raise BackendError(proc.stderr.strip() or f"backend exited with status {proc.returncode}")
            with open(sol_path) as fh:
                listing = import_solution(model, fh.read())
        status = listing.status or "optimal"
        if status == "infeasible":
            return BackendResult("infeasible", None, math.inf, math.inf)
        values = {n: listing.values.get(n, 0.0) for n in model.variables}
        obj = listing.objective if listing.objective is not None else model.objective_value(values)
        bound = listing.bound if listing.bound is not None else (obj if status == "optimal" else -math.inf)
        return BackendResult(status, values, obj, bound)


def make_backend(spec: Optional[str]):
    """'bnb', 'highs', or a path/command of an external adapter."""
    if spec is None or spec == "bnb":
        return BranchAndBoundBackend()
    if spec == "highs":
        return HighsBackend()
    if spec == "highs-adapter":
        return ExternalBackend([sys.executable, "-m", "ccsp.mip.highs_adapter"])
    return ExternalBackend(spec)
