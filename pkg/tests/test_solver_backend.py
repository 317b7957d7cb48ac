import shlex
import sys

import numpy as np
import pytest
import scipy.sparse as sp

from matchcert.errors import BackendError, ParameterError, ValidationError
from matchcert.lp_model import INFEASIBLE, OPTIMAL, UNBOUNDED, LpModel, build_lower_lp, extract_grid_function
from matchcert.solver_backend import EMBEDDED, ENV_VAR, EXTERNAL, HIGHS, SolverConfig, solve, solve_highs

BACKENDS = [SolverConfig(EMBEDDED), SolverConfig(EXTERNAL), SolverConfig(HIGHS)]


def toy(lower_x=0.0, bound_y=3.0, extra_rows=()):
    rows = [[1.0, 1.0], [1.0, -1.0], *[r[0] for r in extra_rows]]
    senses = ["<=", ">=", *[r[1] for r in extra_rows]]
    rhs = [4.0, -2.0, *[r[2] for r in extra_rows]]
    return LpModel(("x", "y"), [lower_x, 0.0], [3.0, bound_y], sp.csr_matrix(rows), senses, rhs, [1.0, 2.0])


@pytest.mark.parametrize("config", BACKENDS, ids=lambda c: c.backend)
def test_toy_optimum(config):
    sol = solve(toy(), config)
    assert sol.status == OPTIMAL
    assert sol.objective_value == pytest.approx(7.0, abs=1e-9)
    assert sol.assignment["x"] == pytest.approx(1.0, abs=1e-9)
    assert sol.assignment["y"] == pytest.approx(3.0, abs=1e-9)


@pytest.mark.parametrize("config", BACKENDS, ids=lambda c: c.backend)
def test_infeasible(config):
    model = toy(extra_rows=[([1.0, 1.0], ">=", 10.0)])
    assert solve(model, config).status == INFEASIBLE


@pytest.mark.parametrize("config", BACKENDS, ids=lambda c: c.backend)
def test_unbounded(config):
    model = LpModel(("x", "y"), [0, 0], [np.inf, np.inf], sp.csr_matrix([[1.0, -1.0]]), ["<="], [1.0],
                    [1.0, 0.0])
    assert solve(model, config).status == UNBOUNDED


@pytest.mark.parametrize("config", BACKENDS, ids=lambda c: c.backend)
def test_equality_and_negative_bounds(config):
    model = toy(lower_x=-5.0, extra_rows=[([1.0, 2.0], "=", 1.0)])
    sol = solve(model, config)
    # x + 2y = 1 with x - y >= -2 and x + y <= 4: best is y = 1, x = -1
    assert sol.objective_value == pytest.approx(1.0, abs=1e-9)


def test_backends_agree_on_lower_lp():
    model = build_lower_lp(4)
    values = [solve(model, cfg).objective_value for cfg in BACKENDS]
    assert max(values) - min(values) <= 1e-6
    grids = [extract_grid_function(solve(model, cfg), 4) for cfg in BACKENDS]
    for grid in grids:
        assert grid.n == 4


def test_embedded_is_deterministic():
    model = build_lower_lp(3)
    a, b = solve(model), solve(model)
    assert a.assignment == b.assignment


def test_external_command_from_environment(monkeypatch):
    cmd = f"{shlex.quote(sys.executable)} -m matchcert.highs_runner {{in}} --out {{out}} --method highs-ds"
    monkeypatch.setenv(ENV_VAR, cmd)
    assert SolverConfig(EXTERNAL).command_template() == cmd
    assert solve(toy(), SolverConfig(EXTERNAL)).objective_value == pytest.approx(7.0, abs=1e-9)


def test_external_command_precedence(monkeypatch):
    monkeypatch.setenv(ENV_VAR, "from-env")
    assert SolverConfig(EXTERNAL, external_command="explicit").command_template() == "explicit"


def test_external_missing_binary():
    with pytest.raises(BackendError):
        solve(toy(), SolverConfig(EXTERNAL, external_command="/nonexistent/solver {in} {out}"))


def test_external_nonzero_exit():
    cmd = f"{shlex.quote(sys.executable)} -c 'import sys; sys.exit(5)' {{in}} {{out}}"
    with pytest.raises(BackendError, match="exited with 5"):
        solve(toy(), SolverConfig(EXTERNAL, external_command=cmd))


def test_external_without_solution_file():
    cmd = f"{shlex.quote(sys.executable)} -c pass {{in}} {{out}}"
    with pytest.raises(BackendError, match="no solution"):
        solve(toy(), SolverConfig(EXTERNAL, external_command=cmd))


def test_external_bad_solution_is_rejected(tmp_path):
    script = tmp_path / "liar.py"
    script.write_text("import sys\nopen(sys.argv[2], 'w').write('status optimal\\nobjective 99\\nx 3\\ny 3\\n')\n")
    cmd = f"{shlex.quote(sys.executable)} {shlex.quote(str(script))} {{in}} {{out}}"
    with pytest.raises(ValidationError):
        solve(toy(), SolverConfig(EXTERNAL, external_command=cmd))


@pytest.mark.parametrize("kwargs", [{"backend": "cplex"}, {"time_limit": 0}, {"feasibility_tolerance": 0.0},
                                    {"feasibility_tolerance": 0.1}])
def test_config_validation(kwargs):
    with pytest.raises(ParameterError):
        SolverConfig(**kwargs)


def test_unknown_highs_method():
    with pytest.raises(ParameterError):
        solve_highs(toy(), method="barrier")
