"""Solve one small random CCSP instance with every methodology and compare.

    python3 demos/compare_methods.py [seed]
"""
import sys

import numpy as np

from ccsp.brkga import BrkgaParams
from ccsp.core import Metric
from ccsp.instance_io import random_ccsp
from ccsp.methods import SolveConfig, solve

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 7
inst = random_ccsp(np.random.default_rng(seed), 9, 4, 3, 2, Metric.EXACT, name=f"demo{seed}")
print(f"{inst.name}: {inst.n} vertices, {len(inst.demand_vertices)} demands, Q = {inst.capacity}")
for u in inst.demand_vertices:
    print(f"  demand {u} (q = {inst.demand[u]}) can be serviced from {sorted(inst.covered_by[u])}")

cfg = SolveConfig(brkga=BrkgaParams(population_size=60, max_generations=30, max_seconds=None, seed=seed),
                  backend="highs")
print(f"\n{'method':14s} {'UB':>10s} {'LB':>10s}  routes")
for method in ("brkga", "matheuristic", "ccsp1", "ccsp1-warm", "exact-oracle"):
    rec, sol = solve(inst, method, cfg)
    lb = "-" if rec.lower_bound is None else f"{rec.lower_bound:.3f}"
    routes = "  ".join("-".join(map(str, r.nodes)) for r in sol.routes) if sol else "-"
    print(f"{method:14s} {rec.upper_bound:10.3f} {lb:>10s}  {routes}")
