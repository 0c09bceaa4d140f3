"""Command-line front end: ``ccsp {generate,solve,report,validate,export}``.

Output files go to ``--out`` or, when absent, to the directory named by the
``CCSP_OUT_DIR`` environment variable (default ``./runs``).  Every solve
appends one JSON line to ``<out>/runs.jsonl``.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path
from typing import List, Optional

from . import instance_io as io
from .brkga import BrkgaParams, parse_config
from .core import validate, validate_mdctvrp
from .local_search import MoveSet
from .methods import METHODS, SolveConfig, solve
from .mip import build_ccsp1, build_ccsp2, build_mdctvrp, export_lp
from .report import build_report, deviations_csv, profile_csv, read_records

OUT_ENV = "CCSP_OUT_DIR"


def _out_dir(arg: Optional[str]) -> Path:
    path = Path(arg or os.environ.get(OUT_ENV) or "runs")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _floats(text: str) -> List[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> List[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _load_instance(path: str):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if io.instance_type(text) == "MDCTVRP":
        return io.read_mdctvrp(text)
    return io.read_ccsp(text)


def _fail(msg: str, code: int = 2) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    try:
        src = io.read_cvrp_file(args.cvrp)
    except (OSError, io.ParseError) as exc:
        return _fail(f"{args.cvrp}: {exc}")
    out = _out_dir(args.out)
    written = []
    for frac in args.fractions:
        for size in args.cover_sizes:
            inst = io.generate_ccsp(src, io.GenerationParams(frac, size))
            path = out / f"{inst.name}.ccsp"
            io.write_ccsp_file(inst, path)
            written.append(path)
    for p in written:
        print(p)
    return 0


def _config_from(args) -> SolveConfig:
    kw = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            kw.update(parse_config(fh.read()))
    flags = {
        "population_size": args.pop,
        "elite_fraction": args.elite,
        "mutant_fraction": args.mutants,
        "crossover_elite_probability": args.rho,
        "seed": args.seed,
        "max_generations": args.max_gen,
        "max_seconds": args.max_sec,
        "stagnation_generations": args.stagnation,
        "workers": args.workers,
    }
    kw.update({k: v for k, v in flags.items() if v is not None})
    if kw.get("max_seconds") is not None and kw["max_seconds"] <= 0:
        kw["max_seconds"] = None
    return SolveConfig(
        brkga=BrkgaParams(**kw),
        moves=MoveSet.parse(args.moves),
        pool_limit=args.pool_limit,
        backend=args.backend,
        time_limit=args.time_limit,
        improve_archive=args.improve_archive,
    )


def cmd_solve(args) -> int:
    try:
        inst = _load_instance(args.instance)
    except (OSError, ValueError) as exc:
        return _fail(f"{args.instance}: {exc}")
    try:
        cfg = _config_from(args)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    rec, sol = solve(inst, args.method, cfg)
    out = _out_dir(args.out)
    if sol is not None:
        if args.method == "mdctvrp-m":
            text = io.write_mdctvrp_solution(inst, sol)
        else:
            text = io.write_solution(inst.name, sol)
        sol_path = out / f"{inst.name}.{args.method}.sol"
        sol_path.write_text(text, encoding="utf-8")
        rec.info["solution_file"] = str(sol_path)
    line = rec.to_json()
    with open(out / "runs.jsonl", "a", encoding="utf-8") as fh:
        fh.write(line + "\n")
    print(line)
    if rec.status == "invalid":
        for v in rec.info.get("violations", []):
            print(v, file=sys.stderr)
        return 1
    return 0


def cmd_report(args) -> int:
    lines = []
    for path in args.runs:
        with open(path, encoding="utf-8") as fh:
            lines.extend(fh.read().splitlines())
    records = read_records(lines)
    if not records:
        return _fail("no run records")
    report = build_report(records)
    out = _out_dir(args.out)
    (out / "deviations.csv").write_text(deviations_csv(report), encoding="utf-8")
    (out / "profile.csv").write_text(profile_csv(report), encoding="utf-8")
    print(report.summary())
    return 0


def cmd_validate(args) -> int:
    try:
        inst = _load_instance(args.instance)
        with open(args.solution, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    named = next((l.split(":", 1)[1].strip() for l in text.splitlines() if l.startswith("NAME")), "")
    if named and named != inst.name:
        print(f"warning: solution is for instance {named!r}, not {inst.name!r}", file=sys.stderr)
    try:
        if hasattr(inst, "n_depots"):
            name, sol = io.read_mdctvrp_solution(text, inst)
            violations = validate_mdctvrp(inst, sol)
        else:
            name, sol = io.read_solution(text, inst)
            violations = validate(inst, sol)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    for v in violations:
        print(v)
    if violations:
        return 1
    print(f"valid: {len(sol.routes)} routes, cost {sol.cost}")
    return 0


BUILDERS = {"ccsp1": build_ccsp1, "ccsp2": build_ccsp2, "mdctvrp-m": build_mdctvrp}
LAZY_NOTE = {
    "ccsp1": "capacity-connectivity rows are separated lazily and not listed",
    "ccsp2": "capacity-connectivity rows are separated lazily and not listed",
    "mdctvrp-m": "depot-to-depot path rows are separated lazily and not listed",
}


def cmd_export(args) -> int:
    try:
        inst = _load_instance(args.instance)
        if (args.formulation == "mdctvrp-m") != hasattr(inst, "n_depots"):
            return _fail(f"formulation {args.formulation} does not match instance type")
        model = BUILDERS[args.formulation](inst)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    text = export_lp(model, header=LAZY_NOTE[args.formulation])
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(args.out)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ccsp", description="Capacitated covering salesman tools")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="derive CCSP instances from a CVRP file")
    g.add_argument("cvrp")
    g.add_argument("--fractions", type=_floats, default=list(io.DEFAULT_FRACTIONS))
    g.add_argument("--cover-sizes", type=_ints, default=list(io.DEFAULT_COVER_SIZES))
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run one methodology on an instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--method", required=True, choices=METHODS)
    s.add_argument("--seed", type=int)
    s.add_argument("--pop", type=int)
    s.add_argument("--elite", type=float)
    s.add_argument("--mutants", type=float)
    s.add_argument("--rho", type=float)
    s.add_argument("--max-gen", type=int)
    s.add_argument("--max-sec", type=float, help="0 disables the time limit")
    s.add_argument("--stagnation", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--pool-limit", type=int, default=1_000_000)
    s.add_argument("--moves", default="all", help="'all' or a comma list of two-opt, or-opt-1..3, sequential-three-opt")
    s.add_argument("--backend", default="highs", help="bnb, highs, or an adapter command taking MODEL.lp OUT.sol")
    s.add_argument("--time-limit", type=float, help="seconds for exact stages")
    s.add_argument("--improve-archive", action="store_true", help="polish archived elite routes before pooling")
    s.add_argument("--config", help="key = value file of BRKGA parameters")
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("report", help="deviation table and performance profile from run logs")
    r.add_argument("runs", nargs="+")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)

    v = sub.add_parser("validate", help="check a solution file against an instance")
    v.add_argument("--instance", required=True)
    v.add_argument("--solution", required=True)
    v.set_defaults(func=cmd_validate)

    e = sub.add_parser("export", help="write a formulation as an LP file")
    e.add_argument("--instance", required=True)
    e.add_argument("--formulation", required=True, choices=sorted(BUILDERS))
    e.add_argument("--out")
    e.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
