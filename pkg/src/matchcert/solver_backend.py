"""Solving LpModel instances.

Three backends share one contract: the returned optimal assignment is always
re-checked against the original model before it is accepted.

* ``embedded`` - dense tableau simplex with Bland's rule (small models).
* ``external`` - writes the interchange file, runs a solver command and reads
  its solution file.  The command template comes from the config, then the
  ``MATCHCERT_SOLVER`` environment variable, then the bundled HiGHS runner.
* ``highs`` - HiGHS through scipy, in process, skipping the text round trip.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import BackendError, ParameterError, SolverToleranceError
from .lp_format import parse_solution, write_interchange
from .lp_model import EQ, ERROR, GE, INFEASIBLE, LE, OPTIMAL, UNBOUNDED, LpModel, LpSolution
from .simplex import solve_dense

EMBEDDED = "embedded"
EXTERNAL = "external"
HIGHS = "highs"
ENV_VAR = "MATCHCERT_SOLVER"
DEFAULT_COMMAND = f"{shlex.quote(sys.executable)} -m matchcert.highs_runner {{in}} --out {{out}}"


@dataclass(frozen=True)
class SolverConfig:
    backend: str = EMBEDDED
    external_command: str | None = None
    time_limit: float = 3600.0
    feasibility_tolerance: float = 1e-9

    def __post_init__(self):
        if self.backend not in (EMBEDDED, EXTERNAL, HIGHS):
            raise ParameterError(f"unknown backend {self.backend!r}")
        if not self.time_limit > 0:
            raise ParameterError("time_limit must be positive")
        if not 0 < self.feasibility_tolerance <= 1e-3:
            raise ParameterError("feasibility_tolerance must lie in (0, 1e-3]")

    def command_template(self) -> str:
        return self.external_command or os.environ.get(ENV_VAR) or DEFAULT_COMMAND


def solve(model: LpModel, config: SolverConfig = SolverConfig()) -> LpSolution:
    if config.backend == EMBEDDED:
        status, obj, x = solve_dense(model)
    elif config.backend == HIGHS:
        status, obj, x = solve_highs(model, config.time_limit, config.feasibility_tolerance)
    else:
        return _solve_external(model, config)
    if status != OPTIMAL:
        return LpSolution(status, float("nan"), {})
    model.validate(x, config.feasibility_tolerance, error=SolverToleranceError)
    return LpSolution(OPTIMAL, obj, dict(zip(model.var_names, x.tolist())))


HIGHS_METHODS = ("highs-ipm", "highs-ds", "highs")


def solve_highs(model: LpModel, time_limit: float = 3600.0, tolerance: float = 1e-9,
                method: str = "highs-ipm"):
    """HiGHS via scipy; returns ``(status, objective, x)``.

    Interior point (with crossover) is the default: on the n=210 upper and
    n=50 lower models it finishes in minutes where dual simplex stalls.
    """
    if method not in HIGHS_METHODS:
        raise ParameterError(f"unknown HiGHS method {method!r}")
    A = model.A.tocsr()
    le = model.senses == LE
    ge = model.senses == GE
    eq = model.senses == EQ
    A_ub = sp.vstack([A[le], -A[ge]]).tocsr()
    b_ub = np.concatenate([model.rhs[le], -model.rhs[ge]])
    bounds = np.column_stack([model.lower, model.upper])
    bounds = [(None if np.isinf(lo) else lo, None if np.isinf(hi) else hi) for lo, hi in bounds]
    kwargs = {}
    if eq.any():
        kwargs = {"A_eq": A[eq], "b_eq": model.rhs[eq]}
    res = linprog(
        -model.objective,
        A_ub=A_ub if A_ub.shape[0] else None,
        b_ub=b_ub if A_ub.shape[0] else None,
        bounds=bounds,
        method=method,
        options={
            "time_limit": float(time_limit),
            "primal_feasibility_tolerance": min(1e-7, tolerance / 10),
            "dual_feasibility_tolerance": 1e-9,
            "presolve": True,
        },
        **kwargs,
    )
    if res.status == 0:
        return OPTIMAL, float(-res.fun), np.asarray(res.x, dtype=float)
    if res.status == 2:
        return INFEASIBLE, float("nan"), None
    if res.status == 3:
        return UNBOUNDED, float("nan"), None
    if res.status == 1:
        raise BackendError(f"HiGHS hit its limit: {res.message}")
    return ERROR, float("nan"), None


def _solve_external(model: LpModel, config: SolverConfig) -> LpSolution:
    template = config.command_template()
    with tempfile.TemporaryDirectory(prefix="matchcert-") as tmp:
        lp_path = Path(tmp) / "model.lp"
        out_path = Path(tmp) / "model.sol"
        write_interchange(model, lp_path)
        argv = [tok.format(**{"in": str(lp_path), "out": str(out_path)}) for tok in shlex.split(template)]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=config.time_limit)
        except subprocess.TimeoutExpired as exc:
            raise BackendError(f"external solver exceeded {config.time_limit:g}s") from exc
        except OSError as exc:
            raise BackendError(f"cannot start external solver: {exc}") from exc
        if proc.returncode != 0:
            raise BackendError(f"external solver exited with {proc.returncode}: {proc.stderr.strip()[-500:]}")
        if not out_path.exists():
            raise BackendError("external solver produced no solution file")
        sol = parse_solution(out_path.read_text(), model)
    if sol.status == OPTIMAL:
        model.validate(sol.vector(model), config.feasibility_tolerance, error=SolverToleranceError)
    return sol
