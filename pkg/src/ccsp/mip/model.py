"""Solver-independent MIP models and their LP-file text form.

LP grammar written (and read back) here::

    \\ <model name>
    Minimize
     obj: 3 x_1_2 + 2 y_2
    Subject To
     deg_1: x_1_2 + x_1_3 - 2 K = 0
    Bounds
     0 <= x_1_2 <= 2
    Generals
     x_1_2
    Binaries
     y_2
    End

Variables appear in declaration order, constraints in insertion order, and
every token is separated by a single space, so the text is byte-deterministic.
Every non-binary variable gets an explicit bound line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

import numpy as np
from scipy import sparse

KINDS = ("binary", "integer", "continuous")
SENSES = ("<=", ">=", "=")
LINE_WIDTH = 200


@dataclass
class Variable:
    name: str
    kind: str = "continuous"
    lb: float = 0.0
    ub: float = math.inf

    @property
    def is_integer(self) -> bool:
        return self.kind != "continuous"


@dataclass
class Constraint:
    name: str
    coeffs: Dict[str, float]
    sense: str
    rhs: float

    def activity(self, values: Dict[str, float]) -> float:
        return sum(c * values.get(v, 0.0) for v, c in self.coeffs.items())

    def violation(self, values: Dict[str, float]) -> float:
        lhs = self.activity(values)
        if self.sense == "<=":
            return max(0.0, lhs - self.rhs)
        if self.sense == ">=":
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


class MipModel:
    """Minimisation model: typed bounded variables, named linear rows."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: Dict[str, Variable] = {}
        self.constraints: List[Constraint] = []
        self.objective: Dict[str, float] = {}
        self.annotations: Dict[str, str] = {}
        self.priorities: Dict[str, int] = {}  # branching hints, higher first
        self._row_names = set()

    # building -------------------------------------------------------------
    def add_var(self, name: str, kind: str = "continuous", lb: float = 0.0, ub: Optional[float] = None,
                obj: float = 0.0, symbol: Optional[str] = None) -> str:
        if kind not in KINDS:
            raise ValueError(f"unknown variable kind {kind!r}")
        if name in self.variables:
            raise ValueError(f"duplicate variable {name!r}")
        if kind == "binary":
            lb, ub = 0.0, 1.0
        self.variables[name] = Variable(name, kind, float(lb), math.inf if ub is None else float(ub))
        if obj:
            self.objective[name] = float(obj)
        if symbol:
            self.annotations[name] = symbol
        return name

    def add_constraint(self, name: str, coeffs: Dict[str, float], sense: str, rhs: float) -> Constraint:
        if sense not in SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        if name in self._row_names:
            raise ValueError(f"duplicate constraint {name!r}")
        unknown = [v for v in coeffs if v not in self.variables]
        if unknown:
            raise ValueError(f"constraint {name!r} references undeclared variables {unknown[:5]}")
        row = Constraint(name, {v: float(c) for v, c in coeffs.items() if c != 0}, sense, float(rhs))
        self.constraints.append(row)
        self._row_names.add(name)
        return row

    def has_constraint(self, name: str) -> bool:
        return name in self._row_names

    def copy(self) -> "MipModel":
        m = MipModel(self.name)
        m.variables = {k: Variable(v.name, v.kind, v.lb, v.ub) for k, v in self.variables.items()}
        m.constraints = [Constraint(c.name, dict(c.coeffs), c.sense, c.rhs) for c in self.constraints]
        m.objective = dict(self.objective)
        m.annotations = dict(self.annotations)
        m.priorities = dict(self.priorities)
        m._row_names = set(self._row_names)
        return m

    # queries --------------------------------------------------------------
    def count(self, kind: Optional[str] = None, prefix: Optional[str] = None) -> int:
        return sum(
            1 for v in self.variables.values()
            if (kind is None or v.kind == kind) and (prefix is None or v.name.startswith(prefix))
        )

    def objective_value(self, values: Dict[str, float]) -> float:
        return float(sum(c * values.get(v, 0.0) for v, c in self.objective.items()))

    def violations(self, values: Dict[str, float], tol: float = 1e-6) -> List[str]:
        """Names of rows and bounds (``bound:<var>``) the assignment violates."""
        bad = [c.name for c in self.constraints if c.violation(values) > tol]
        for v in self.variables.values():
            x = values.get(v.name, 0.0)
            if x < v.lb - tol or x > v.ub + tol or (v.is_integer and abs(x - round(x)) > tol):
                bad.append(f"bound:{v.name}")
        return bad

    def arrays(self):
        """Dense-free matrix form: (names, c, A, row_lo, row_hi, lb, ub, integrality)."""
        names = list(self.variables)
        index = {n: i for i, n in enumerate(names)}
        c = np.array([self.objective.get(n, 0.0) for n in names])
        rows, cols, vals = [], [], []
        lo = np.empty(len(self.constraints))
        hi = np.empty(len(self.constraints))
        for r, con in enumerate(self.constraints):
            for v, a in con.coeffs.items():
                rows.append(r)
                cols.append(index[v])
                vals.append(a)
            lo[r] = con.rhs if con.sense in (">=", "=") else -np.inf
            hi[r] = con.rhs if con.sense in ("<=", "=") else np.inf
        A = sparse.csr_matrix((vals, (rows, cols)), shape=(len(self.constraints), len(names)))
        lb = np.array([self.variables[n].lb for n in names])
        ub = np.array([self.variables[n].ub for n in names])
        integrality = np.array([1 if self.variables[n].is_integer else 0 for n in names])
        return names, c, A, lo, hi, lb, ub, integrality


# ---------------------------------------------------------------------------
# LP text
# ---------------------------------------------------------------------------


def _num(x: float) -> str:
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _expr(coeffs: Dict[str, float], order: Dict[str, int]) -> List[str]:
    tokens: List[str] = []
    for name in sorted(coeffs, key=order.__getitem__):
        c = coeffs[name]
        sign = "-" if c < 0 else "+"
        if tokens or sign == "-":
            tokens.append(sign)
        tokens.append(f"{_num(abs(c))} {name}")
    return tokens


def _wrap(head: str, tokens: Iterable[str]) -> List[str]:
    lines, cur = [], head
    for t in tokens:
        if len(cur) + 1 + len(t) > LINE_WIDTH and cur.strip():
            lines.append(cur)
            cur = "  " + t
        else:
            cur = f"{cur} {t}" if cur else t
    lines.append(cur)
    return lines


def export_lp(model: MipModel, header: Optional[str] = None) -> str:
    order = {n: i for i, n in enumerate(model.variables)}
    out = [f"\\ {model.name}"]
    if header:
        out.extend(f"\\ {line}" for line in header.splitlines())
    out.append("Minimize")
    obj = _expr(model.objective, order)
    if not obj and model.variables:
        obj = [f"0 {next(iter(model.variables))}"]
    out.extend(_wrap(" obj:", obj))
    out.append("Subject To")
    for con in model.constraints:
        terms = _expr(con.coeffs, order)
        if not terms:
            terms = [f"0 {next(iter(model.variables))}"]
        out.extend(_wrap(f" {con.name}:", terms + [con.sense, _num(con.rhs)]))
    out.append("Bounds")
    for v in model.variables.values():
        if v.kind == "binary":
            continue
        if math.isinf(v.lb) and math.isinf(v.ub):
            out.append(f" {v.name} free")
        elif math.isinf(v.ub):
            out.append(f" {v.name} >= {_num(v.lb)}")
        else:
            out.append(f" {_num(v.lb)} <= {v.name} <= {_num(v.ub)}")
    gens = [v.name for v in model.variables.values() if v.kind == "integer"]
    bins = [v.name for v in model.variables.values() if v.kind == "binary"]
    if gens:
        out.append("Generals")
        out.extend(_wrap("", gens))
    if bins:
        out.append("Binaries")
        out.extend(_wrap("", bins))
    out.append("End")
    return "\n".join(" " + l.lstrip() if l and l[0] == " " else l for l in out) + "\n"


_SECTIONS = {
    "minimize": "obj", "minimise": "obj", "min": "obj",
    "subject to": "rows", "st": "rows", "s.t.": "rows", "such that": "rows",
    "bounds": "bounds", "bound": "bounds",
    "generals": "gen", "general": "gen", "gen": "gen",
    "binaries": "bin", "binary": "bin", "bin": "bin",
    "end": "end",
}


class LpFormatError(ValueError):
    pass


def _parse_float(tok: str) -> float:
    t = tok.lower()
    if t in ("inf", "+inf", "infinity", "+infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    return float(tok)


def _parse_linear(tokens: List[str], where: str) -> Dict[str, float]:
    coeffs: Dict[str, float] = {}
    sign, coef = 1.0, None
    for tok in tokens:
        if tok in ("+", "-"):
            sign = -1.0 if tok == "-" else 1.0
            continue
        try:
            coef = float(tok)
            continue
        except ValueError:
            pass
        coeffs[tok] = coeffs.get(tok, 0.0) + sign * (1.0 if coef is None else coef)
        sign, coef = 1.0, None
    if coef is not None:
        raise LpFormatError(f"{where}: dangling constant {coef}")
    return coeffs


def read_lp(text: str) -> MipModel:
    """Parse LP text in the grammar written by :func:`export_lp`."""
    model = MipModel()
    section = None
    chunks: Dict[str, List[List[str]]] = {"obj": [], "rows": []}
    bounds: List[str] = []
    gens: List[str] = []
    bins: List[str] = []
    seen_end = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if raw.startswith("\\"):
            if section is None and model.name == "model":
                model.name = raw[1:].strip() or "model"
            continue
        line = raw.strip()
        if not line:
            continue
        key = line.lower()
        if key in _SECTIONS:
            section = _SECTIONS[key]
            if section == "end":
                seen_end = True
                break
            continue
        if section is None:
            raise LpFormatError(f"line {lineno}: content before any section")
        toks = line.split()
        if section in ("obj", "rows"):
            if toks[0].endswith(":"):
                chunks[section].append(toks)
            elif chunks[section]:
                chunks[section][-1].extend(toks)
            else:
                raise LpFormatError(f"line {lineno}: expected 'name:' to start a row")
        elif section == "bounds":
            bounds.append(line)
        elif section == "gen":
            gens.extend(toks)
        elif section == "bin":
            bins.extend(toks)
    if not seen_end:
        raise LpFormatError("missing End")

    declared: Dict[str, None] = {}

    def note(names):
        for n in names:
            declared.setdefault(n, None)

    obj = {}
    for toks in chunks["obj"]:
        obj = _parse_linear(toks[1:], "objective")
        note(obj)
    rows = []
    for toks in chunks["rows"]:
        name = toks[0][:-1]
        sense_at = [i for i, t in enumerate(toks) if t in SENSES or t in ("=<", "=>", "<", ">")]
        if len(sense_at) != 1 or sense_at[0] != len(toks) - 2:
            raise LpFormatError(f"row {name}: malformed")
        s = {"=<": "<=", "<": "<=", "=>": ">=", ">": ">="}.get(toks[-2], toks[-2])
        coeffs = _parse_linear(toks[1:-2], f"row {name}")
        note(coeffs)
        rows.append((name, coeffs, s, _parse_float(toks[-1])))
    bnd = {}
    for line in bounds:
        toks = line.split()
        if len(toks) == 2 and toks[1].lower() == "free":
            bnd[toks[0]] = (-math.inf, math.inf)
        elif len(toks) == 5 and toks[1] == "<=" and toks[3] == "<=":
            bnd[toks[2]] = (_parse_float(toks[0]), _parse_float(toks[4]))
        elif len(toks) == 3 and toks[1] in (">=", "<=", "="):
            lo, hi = bnd.get(toks[0], (0.0, math.inf))
            val = _parse_float(toks[2])
            if toks[1] == ">=":
                lo = val
            elif toks[1] == "<=":
                hi = val
            else:
                lo = hi = val
            bnd[toks[0]] = (lo, hi)
        else:
            raise LpFormatError(f"cannot read bound line {line!r}")
        note([toks[0] if len(toks) != 5 else toks[2]])
    note(gens)
    note(bins)
    gset, bset = set(gens), set(bins)
    for name in declared:
        lo, hi = bnd.get(name, (0.0, math.inf))
        kind = "binary" if name in bset else "integer" if name in gset else "continuous"
        model.add_var(name, kind, lo, hi, obj=obj.get(name, 0.0))
    for name, coeffs, s, rhs in rows:
        model.add_constraint(name, coeffs, s, rhs)
    return model


# ---------------------------------------------------------------------------
# solution listings
# ---------------------------------------------------------------------------


@dataclass
class SolutionListing:
    values: Dict[str, float]
    objective: Optional[float] = None
    bound: Optional[float] = None
    status: Optional[str] = None


def write_solution_values(values: Dict[str, float], objective: Optional[float] = None,
                          bound: Optional[float] = None, status: Optional[str] = None) -> str:
    lines = []
    if status is not None:
        lines.append(f"# status {status}")
    if objective is not None:
        lines.append(f"# objective {objective!r}")
    if bound is not None:
        lines.append(f"# bound {bound!r}")
    lines.extend(f"{k} {_num(v)}" for k, v in values.items())
    return "\n".join(lines) + "\n"


def import_solution(model: MipModel, text: str) -> SolutionListing:
    """Read ``name value`` (or ``name=value``) lines; '#' lines are comments,
    except ``# objective``, ``# bound`` and ``# status`` which carry metadata."""
    out = SolutionListing({})
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] in ("objective", "bound"):
                setattr(out, parts[0], _parse_float(parts[1]))
            elif len(parts) == 2 and parts[0] == "status":
                out.status = parts[1]
            continue
        parts = line.replace("=", " ").split()
        if len(parts) != 2:
            raise ValueError(f"solution line {lineno}: expected 'name value'")
        name, val = parts
        if name not in model.variables:
            raise ValueError(f"solution line {lineno}: unknown variable {name!r}")
        out.values[name] = float(val)
    return out
