"""Deviation from the best known upper bound and cumulative performance profiles.

deviation(UB, BestUB) = (UB - BestUB) / UB * 100, where BestUB is the smallest
upper bound any methodology reached on the instance.

CSV outputs:

* deviations: ``instance,method,upper_bound,best_upper_bound,deviation_pct``
* profile:    ``method,threshold_pct,fraction_solved`` where fraction_solved
  is the share of all report instances on which the method is within the
  threshold.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

from .methods import RunRecord


def deviation(ub: float, best_ub: float) -> float:
    if best_ub > ub:
        raise ValueError("best upper bound exceeds the upper bound")
    if ub == 0:
        return 0.0
    return (ub - best_ub) / ub * 100.0


@dataclass(frozen=True)
class DeviationRow:
    instance: str
    method: str
    upper_bound: float
    best_upper_bound: float
    deviation: float


@dataclass
class DeviationReport:
    rows: List[DeviationRow]
    profile: Dict[str, List[Tuple[float, float]]]
    instances: List[str]

    def summary(self) -> str:
        lines = [f"{len(self.instances)} instances"]
        for method in sorted(self.profile):
            devs = [r.deviation for r in self.rows if r.method == method]
            best = sum(1 for d in devs if d == 0.0)
            mean = sum(devs) / len(devs) if devs else float("nan")
            lines.append(
                f"{method:14s} runs {len(devs):4d}  best {best:4d} ({100.0 * best / len(self.instances):5.1f}%)  "
                f"mean deviation {mean:.3f}%"
            )
        return "\n".join(lines)


def _best_per_pair(records: Iterable[RunRecord]) -> Dict[Tuple[str, str], float]:
    out: Dict[Tuple[str, str], float] = {}
    for rec in records:
        ub = rec.upper_bound
        if ub is None or not math.isfinite(ub) or rec.status == "invalid":
            warnings.warn(f"skipping {rec.method} on {rec.instance}: no valid upper bound")
            continue
        key = (rec.instance, rec.method)
        out[key] = min(ub, out.get(key, math.inf))
    return out


def profile_points(devs: Sequence[float], thresholds: Sequence[float], n_instances: int) -> List[Tuple[float, float]]:
    devs = sorted(devs)
    pts = []
    k = 0
    for t in thresholds:
        while k < len(devs) and devs[k] <= t:
            k += 1
        pts.append((t, k / n_instances))
    return pts


def build_report(records: Iterable[RunRecord]) -> DeviationReport:
    best = _best_per_pair(records)
    instances = sorted({i for i, _ in best})
    best_ub = {i: min(ub for (j, _), ub in best.items() if j == i) for i in instances}
    rows = [
        DeviationRow(i, m, ub, best_ub[i], deviation(ub, best_ub[i]))
        for (i, m), ub in sorted(best.items())
    ]
    thresholds = sorted({r.deviation for r in rows})
    methods = sorted({r.method for r in rows})
    profile = {
        m: profile_points([r.deviation for r in rows if r.method == m], thresholds, len(instances)) for m in methods
    }
    return DeviationReport(rows, profile, instances)


def deviations_csv(report: DeviationReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["instance", "method", "upper_bound", "best_upper_bound", "deviation_pct"])
    for r in report.rows:
        w.writerow([r.instance, r.method, repr(r.upper_bound), repr(r.best_upper_bound), repr(r.deviation)])
    return buf.getvalue()


def profile_csv(report: DeviationReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "threshold_pct", "fraction_solved"])
    for m, pts in sorted(report.profile.items()):
        for t, f in pts:
            w.writerow([m, repr(t), repr(f)])
    return buf.getvalue()


def read_records(lines: Iterable[str]) -> List[RunRecord]:
    return [RunRecord.from_json(line) for line in lines if line.strip()]
