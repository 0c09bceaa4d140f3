"""Reference external-backend adapter: ``python -m ccsp.mip.highs_adapter model.lp out.sol``.

Reads an LP file, solves it with HiGHS and writes a solution listing.  Any
other solver can be wired in the same way by writing a script with this
two-argument contract.
"""
from __future__ import annotations

import os
import sys

from .backends import HighsBackend
from .model import read_lp, write_solution_values


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print("usage: python -m ccsp.mip.highs_adapter MODEL.lp OUT.sol", file=sys.stderr)
        return 2
    with open(argv[0]) as fh:
        model = read_lp(fh.read())
    limit = os.environ.get("CCSP_TIME_LIMIT")
    res = HighsBackend().solve(model, time_limit=float(limit) if limit else None)
    with open(argv[1], "w") as fh:
        fh.write(write_solution_values(res.values or {}, res.objective, res.bound, res.status))
    return 0


if __name__ == "__main__":
    sys.exit(main())
