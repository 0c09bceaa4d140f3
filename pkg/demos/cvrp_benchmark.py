"""Derive CCSP instances from a CVRP file, run the two heuristics and print
the deviation profile.

    python3 demos/cvrp_benchmark.py [path/to/file.vrp]
"""
import sys
from pathlib import Path

from ccsp import instance_io as io
from ccsp.brkga import BrkgaParams
from ccsp.methods import SolveConfig, solve
from ccsp.report import build_report

vrp = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent.parent / "tests" / "data" / "S-n101-k25.vrp"
src = io.read_cvrp_file(vrp)
cfg = SolveConfig(brkga=BrkgaParams(population_size=80, max_generations=30, max_seconds=None, seed=1),
                  backend="highs")

records = []
for frac, size in [(0.1, 7), (0.2, 9), (0.4, 11)]:
    inst = io.generate_ccsp(src, io.GenerationParams(frac, size))
    for method in ("brkga", "matheuristic"):
        rec, _ = solve(inst, method, cfg)
        records.append(rec)
        print(f"{inst.name:18s} {method:13s} UB {rec.upper_bound:9.1f}  {rec.wall_time:6.1f} s  {rec.status}")

report = build_report(records)
print("\ndeviation from the best upper bound (%)")
for row in report.rows:
    print(f"  {row.instance:18s} {row.method:13s} {row.deviation:6.2f}")
print("\nfraction of instances within each threshold")
for method, pts in report.profile.items():
    print(f"  {method:13s} " + "  ".join(f"{t:.1f}%:{f:.2f}" for t, f in pts))
