"""Capacitated Covering Salesman Problem: instances, BRKGA heuristic, route-pool
matheuristic and integer programming models."""
from .core import (
    CcspInstance,
    InfeasibleInstanceError,
    MdctvrpInstance,
    MdctvrpSolution,
    Metric,
    Route,
    Solution,
    Violation,
    ViolationKind,
    validate,
    validate_mdctvrp,
)
from .brkga import BrkgaParams
from .decoder import CcspDecoder, decode
from .local_search import MoveSet, improve_route, improve_solution
from .matheuristic import RoutePool, enumerate_small_routes, exact_ccsp, solve_cover_packing

__version__ = "0.1.0"
