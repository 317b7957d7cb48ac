"""Stand-alone solver process for the external backend.

    python -m matchcert.highs_runner model.lp --out model.sol

Reads an interchange model, solves it with HiGHS and writes the key-value
solution format.  Exit code 0 whenever a solution file (of any status) was
written.
"""

import argparse
import sys

from .lp_format import format_solution, read_interchange
from .lp_model import OPTIMAL, LpSolution
from .solver_backend import HIGHS_METHODS, solve_highs


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="matchcert.highs_runner")
    ap.add_argument("model")
    ap.add_argument("--out", required=True)
    ap.add_argument("--time-limit", type=float, default=3600.0)
    ap.add_argument("--tolerance", type=float, default=1e-9)
    ap.add_argument("--method", choices=HIGHS_METHODS, default="highs-ipm")
    args = ap.parse_args(argv)
    model = read_interchange(args.model)
    status, obj, x = solve_highs(model, args.time_limit, args.tolerance, args.method)
    if status == OPTIMAL:
        sol = LpSolution(status, obj, dict(zip(model.var_names, x.tolist())))
    else:
        sol = LpSolution(status, float("nan"), {})
    with open(args.out, "w") as fh:
        fh.write(format_solution(sol, model))
    return 0


if __name__ == "__main__":
    sys.exit(main())
