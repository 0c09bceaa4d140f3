"""Intra-route improvement: 2-opt, Or-opt (segments of 1-3) and sequential
3-opt, first improvement with a fixed scan order.  The depot stays at both
ends and the service map is untouched, so feasibility is preserved."""
from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, List

from .core import CcspInstance, Route, Solution

TWO_OPT = "two-opt"
OR_OPT_1 = "or-opt-1"
OR_OPT_2 = "or-opt-2"
OR_OPT_3 = "or-opt-3"
THREE_OPT = "sequential-three-opt"
ALL_MOVES = (TWO_OPT, OR_OPT_1, OR_OPT_2, OR_OPT_3, THREE_OPT)

EPS = 1e-9


@dataclass(frozen=True)
class MoveSet:
    moves: FrozenSet[str] = frozenset(ALL_MOVES)
    max_passes: int = 10**6

    def __post_init__(self):
        if not self.moves:
            raise ValueError("at least one move must be enabled")
        unknown = set(self.moves) - set(ALL_MOVES)
        if unknown:
            raise ValueError(f"unknown moves {sorted(unknown)}")

    @classmethod
    def parse(cls, text: str) -> "MoveSet":
        """Comma separated move names, or 'all'."""
        if text.strip() == "all":
            return cls()
        return cls(frozenset(m.strip() for m in text.split(",") if m.strip()))


def _two_opt(t: List[int], d) -> bool:
    n = len(t) - 1
    for i in range(n - 1):
        a, b = t[i], t[i + 1]
        for j in range(i + 2, n):
            c, e = t[j], t[j + 1]
            delta = d[a, c] + d[b, e] - d[a, b] - d[c, e]
            if delta < -EPS:
                t[i + 1 : j + 1] = t[i + 1 : j + 1][::-1]
                return True
    return False


def _or_opt(t: List[int], d, length: int) -> bool:
    n = len(t) - 1  # t[0] == t[n] == depot
    for i in range(1, n - length + 1):
        j = i + length - 1  # segment t[i..j]
        p, q = t[i - 1], t[j + 1]
        s, e = t[i], t[j]
        removal = d[p, s] + d[e, q] - d[p, q]
        rest = t[:i] + t[j + 1 :]
        for k in range(len(rest) - 1):
            if k == i - 1:
                continue
            a, b = rest[k], rest[k + 1]
            fwd = d[a, s] + d[e, b] - d[a, b]
            rev = d[a, e] + d[s, b] - d[a, b]
            seg = t[i : j + 1]
            if fwd - removal < -EPS:
                t[:] = rest[: k + 1] + seg + rest[k + 1 :]
                return True
            if length > 1 and rev - removal < -EPS:
                t[:] = rest[: k + 1] + seg[::-1] + rest[k + 1 :]
                return True
    return False


def _three_opt(t: List[int], d) -> bool:
    n = len(t) - 1
    for i in range(n - 2):
        a, b1 = t[i], t[i + 1]
        for j in range(i + 1, n - 1):
            b2, c1 = t[j], t[j + 1]
            for k in range(j + 1, n):
                c2, e = t[k], t[k + 1]
                removed = d[a, b1] + d[b2, c1] + d[c2, e]
                B, C = t[i + 1 : j + 1], t[j + 1 : k + 1]
                options = (
                    (d[a, b2] + d[b1, c2] + d[c1, e], B[::-1] + C[::-1]),
                    (d[a, c1] + d[c2, b1] + d[b2, e], C + B),
                    (d[a, c1] + d[c2, b2] + d[b1, e], C + B[::-1]),
                    (d[a, c2] + d[c1, b1] + d[b2, e], C[::-1] + B),
                )
                for added, middle in options:
                    if added - removed < -EPS:
                        t[i + 1 : k + 1] = middle
                        return True
    return False


def improve_route(route: Route, instance: CcspInstance, moves: MoveSet = MoveSet()) -> Route:
    t = list(route.nodes)
    if len(t) <= 4:
        # at most two visits: every ordering costs the same
        return route.copy()
    d = instance.dist
    enabled = moves.moves
    for _ in range(moves.max_passes):
        if TWO_OPT in enabled and _two_opt(t, d):
            continue
        if any(m in enabled and _or_opt(t, d, L) for m, L in ((OR_OPT_1, 1), (OR_OPT_2, 2), (OR_OPT_3, 3))):
            continue
        if THREE_OPT in enabled and _three_opt(t, d):
            continue
        break
    return Route(t, dict(route.serviced))


def improve_solution(solution: Solution, instance: CcspInstance, moves: MoveSet = MoveSet()) -> Solution:
    return Solution.from_routes(instance, [improve_route(r, instance, moves) for r in solution.routes])
