from .backends import BackendError, BackendResult, BranchAndBoundBackend, ExternalBackend, HighsBackend, make_backend
from .cutting_plane import CuttingPlaneResult, Limits, cutting_plane_solve
from .formulations import (
    PathCut,
    build_ccsp1,
    build_ccsp2,
    build_mdctvrp,
    ccsp_separator,
    decode_ccsp,
    decode_mdctvrp,
    encode_ccsp,
    encode_mdctvrp,
    mdctvrp_separator,
    separate_ccsp_capacity,
    separate_depot_paths,
)
from .model import MipModel, export_lp, import_solution, read_lp

__all__ = [
    "BackendError", "BackendResult", "BranchAndBoundBackend", "ExternalBackend", "HighsBackend", "make_backend",
    "CuttingPlaneResult", "Limits", "cutting_plane_solve",
    "PathCut", "build_ccsp1", "build_ccsp2", "build_mdctvrp", "ccsp_separator", "decode_ccsp", "decode_mdctvrp",
    "encode_ccsp", "encode_mdctvrp", "mdctvrp_separator", "separate_ccsp_capacity", "separate_depot_paths",
    "MipModel", "export_lp", "import_solution", "read_lp",
]
