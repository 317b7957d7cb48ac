"""Factor-revealing linear programs over discretized rank functions.

Two models are built here:

* the lower-bound LP, which maximizes ``t`` subject to ``t <= f~(x_i, y_j)``
  at every node of the n-grid, where ``f~`` replaces every integral of the
  competitive-ratio bound by a left Riemann sum and the inner minimum over
  ``theta`` by a minimum over grid nodes;
* the upper-bound LP, a relaxation that every admissible ``g`` satisfies and
  whose objective over-estimates the bound at a handful of points.

Variables are named ``g_i_j`` (grid value), ``t`` (objective) and
``s_i_j_l`` (inner minimum at outer node (i, j) and inner row l).  The
``recurrence`` formulation of the lower LP additionally uses ``a_k_l`` for the
candidate ``theta = x_k`` at row ``l``; the upper LP uses ``h_p_j`` for the
inner minimum at the p-th evaluation point and row ``j``.

All models maximize.  Constraint matrices are scipy CSR matrices and the
model is treated as immutable once built.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError, SolverToleranceError, ValidationError
from .pwa_grid import STRICT, GridFunction, check_conditions, condition_violations

LE, GE, EQ = "<=", ">=", "="

ENUMERATED = "enumerated"
RECURRENCE = "recurrence"

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ERROR = "error"
STATUSES = (OPTIMAL, INFEASIBLE, UNBOUNDED, ERROR)

REFERENCE_POINTS = (
    (Fraction(0), Fraction(0)),
    (Fraction(1), Fraction(1)),
    (Fraction(0), Fraction(1)),
    (Fraction(1), Fraction(0)),
    (Fraction(23, 40), Fraction(27, 40)),
    (Fraction(1, 2), Fraction(3, 4)),
    (Fraction(13, 30), Fraction(23, 30)),
)


@dataclass(frozen=True, eq=False)
class LpModel:
    var_names: tuple
    lower: np.ndarray = field(repr=False)
    upper: np.ndarray = field(repr=False)
    A: sp.csr_matrix = field(repr=False)
    senses: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    objective: np.ndarray = field(repr=False)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        nv = len(self.var_names)
        A = sp.csr_matrix(self.A, dtype=float)
        A.sum_duplicates()
        A.sort_indices()
        if A.shape[1] != nv:
            raise ParameterError(f"constraint matrix has {A.shape[1]} columns for {nv} variables")
        m = A.shape[0]
        arrays = {
            "lower": np.asarray(self.lower, dtype=float),
            "upper": np.asarray(self.upper, dtype=float),
            "senses": np.asarray(self.senses, dtype="<U2"),
            "rhs": np.asarray(self.rhs, dtype=float),
            "objective": np.asarray(self.objective, dtype=float),
        }
        for key, expect in (("lower", nv), ("upper", nv), ("objective", nv), ("senses", m), ("rhs", m)):
            if arrays[key].shape != (expect,):
                raise ParameterError(f"{key} has shape {arrays[key].shape}, expected {(expect,)}")
        if not set(np.unique(arrays["senses"])) <= {LE, GE, EQ}:
            raise ParameterError("constraint senses must be <=, >= or =")
        if len(set(self.var_names)) != nv:
            raise ParameterError("variable names must be unique")
        for key, arr in arrays.items():
            arr.setflags(write=False)
            object.__setattr__(self, key, arr)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "var_names", tuple(self.var_names))

    @property
    def num_vars(self) -> int:
        return len(self.var_names)

    @property
    def num_constraints(self) -> int:
        return self.A.shape[0]

    @functools.cached_property
    def var_index(self) -> dict:
        return {name: k for k, name in enumerate(self.var_names)}

    def residuals(self, x) -> np.ndarray:
        """Per-row violation (positive means violated) for assignment vector ``x``."""
        ax = self.A @ np.asarray(x, dtype=float)
        viol = np.where(self.senses == LE, ax - self.rhs,
                        np.where(self.senses == GE, self.rhs - ax, np.abs(ax - self.rhs)))
        return viol

    def bound_violations(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.maximum(self.lower - x, x - self.upper)

    def validate(self, x, tolerance: float, error=ValidationError) -> None:
        """Raise ``error`` naming the worst row if any constraint or bound fails."""
        viol = self.residuals(x)
        if viol.size:
            r = int(np.argmax(viol))
            if viol[r] > tolerance:
                raise error(f"constraint c{r} violated by {viol[r]:.3e} (tolerance {tolerance:g})",
                            row=f"c{r}", violation=float(viol[r]))
        bviol = self.bound_violations(x)
        if bviol.size:
            k = int(np.argmax(bviol))
            if bviol[k] > tolerance:
                raise error(f"bound on {self.var_names[k]} violated by {bviol[k]:.3e}",
                            row=self.var_names[k], violation=float(bviol[k]))

    def structurally_equal(self, other: "LpModel") -> bool:
        return (
            self.var_names == other.var_names
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
            and np.array_equal(self.senses, other.senses)
            and np.array_equal(self.rhs, other.rhs)
            and np.array_equal(self.objective, other.objective)
            and self.A.shape == other.A.shape
            and (self.A != other.A).nnz == 0
        )


@dataclass(frozen=True)
class LpSolution:
    status: str
    objective_value: float
    assignment: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ParameterError(f"unknown status {self.status!r}")

    def vector(self, model: LpModel) -> np.ndarray:
        return np.array([self.assignment[name] for name in model.var_names], dtype=float)


class _Rows:
    """Accumulates sparse rows in order."""

    def __init__(self):
        self.ri, self.ci, self.vals = [], [], []
        self.senses, self.rhs = [], []

    def add(self, cols, coefs, sense, rhs):
        r = len(self.rhs)
        self.ri.extend([r] * len(cols))
        self.ci.extend(cols)
        self.vals.extend(coefs)
        self.senses.append(sense)
        self.rhs.append(float(rhs))

    def matrix(self, nvars):
        return sp.csr_matrix((self.vals, (self.ri, self.ci)), shape=(len(self.rhs), nvars))


def _gname(i, j):
    return f"g_{i}_{j}"


def _grid_vars(n):
    names = [_gname(i, j) for i in range(n + 1) for j in range(n + 1)]
    return names, lambda i, j: i * (n + 1) + j


def _add_shape_constraints(rows: _Rows, n: int, gi, mode: str, y_slope_last_column: bool = True) -> None:
    """Condition families 2-5 in adjacent-pair form.

    In relaxed mode ``y_slope_last_column=False`` drops the y-slope rows at
    ``i = n``, the narrower index range some write-ups state.
    """
    fn = float(n)
    for j in range(n + 1):
        for i in range(n):
            rows.add([gi(i, j), gi(i + 1, j)], [1.0, -1.0], LE, 0.0)
    for i in range(n + 1):
        for j in range(n):
            rows.add([gi(i, j + 1), gi(i, j)], [1.0, -1.0], LE, 0.0)
    # x-slope:  n (g(i+1, j) - g(i, j)) <= rhs-node
    for i in range(n):
        for j in range(n + 1):
            if mode == STRICT:
                if j < n:
                    rows.add([gi(i + 1, j), gi(i, j), gi(i, j + 1)], [fn, -fn, -1.0], LE, 0.0)
                else:
                    rows.add([gi(i + 1, n), gi(i, n)], [fn, -fn - 1.0], LE, 0.0)
            else:
                rows.add([gi(i + 1, j), gi(i, j)], [fn - 1.0, -fn], LE, 0.0)
    # y-slope:  n (g(i, j+1) - g(i, j)) - rhs-node >= -1
    for i in range(n + 1):
        for j in range(n):
            if mode == STRICT:
                if i < n:
                    rows.add([gi(i, j + 1), gi(i, j), gi(i + 1, j)], [fn, -fn, -1.0], GE, -1.0)
                else:
                    rows.add([gi(n, j + 1), gi(n, j)], [fn, -fn - 1.0], GE, -1.0)
            elif i < n or y_slope_last_column:
                rows.add([gi(i, j + 1), gi(i, j)], [fn - 1.0, -fn], GE, -1.0)
    # g(n, j) - g(i, j) >= g(n, j+1) - g(i, j+1)
    for i in range(n):
        for j in range(n):
            rows.add([gi(n, j), gi(i, j), gi(n, j + 1), gi(i, j + 1)], [1.0, -1.0, -1.0, 1.0], GE, 0.0)


def lower_census(n: int, formulation: str = ENUMERATED) -> tuple:
    """Closed-form (variables, constraints) of :func:`build_lower_lp`.

    Shape families: 2n(n+1) monotonicity, n(n+1) x-slope, n(n+1) y-slope and
    n^2 diagonal-difference rows.  There are (n+1)^2 objective rows and one
    ``s`` variable per (i, j, l) with l < j, i.e. (n+1) n (n+1)/2 of them.
    Enumerated: one row per (i, j, l, k <= i), (n+1)(n+2)/2 * n(n+1)/2 rows.
    Recurrence: a_k_l for k <= n, l < n; one row per a_k_l, one row per
    s_0_j_l and two per s_i_j_l with i >= 1.
    """
    shape_rows = 2 * n * (n + 1) + 2 * n * (n + 1) + n * n
    t_rows = (n + 1) ** 2
    n_s = (n + 1) * n * (n + 1) // 2
    n_vars = (n + 1) ** 2 + 1 + n_s
    if formulation == ENUMERATED:
        s_rows = ((n + 1) * (n + 2) // 2) * (n * (n + 1) // 2)
        return n_vars, shape_rows + t_rows + s_rows
    if formulation == RECURRENCE:
        n_a = (n + 1) * n
        per_ij = n * (n + 1) // 2  # (j, l) pairs with l < j
        s_rows = per_ij * (1 + 2 * n)
        return n_vars + n_a, shape_rows + t_rows + n_a + s_rows
    raise ParameterError(f"unknown formulation {formulation!r}")


def build_lower_lp(n: int, formulation: str = ENUMERATED) -> LpModel:
    """Lower-bound LP on the n-grid.

    ``enumerated`` writes one constraint per candidate ``k <= i`` for each
    inner minimum; ``recurrence`` chains ``s_i_j_l <= s_{i-1}_j_l + g(i-1, j)/n``
    and ``s_i_j_l <= a_i_l``, which projects onto the same feasible set of
    ``(g, t)`` with O(n^3) instead of O(n^4) rows.
    """
    if int(n) != n or n < 2:
        raise ParameterError(f"lower LP needs n >= 2, got {n!r}")
    if formulation not in (ENUMERATED, RECURRENCE):
        raise ParameterError(f"unknown formulation {formulation!r}")
    n = int(n)
    inv = 1.0 / n
    names, gi = _grid_vars(n)
    t_idx = len(names)
    names.append("t")
    a_idx = {}
    if formulation == RECURRENCE:
        for k in range(n + 1):
            for l in range(n):
                a_idx[k, l] = len(names)
                names.append(f"a_{k}_{l}")
    s_idx = {}
    for i in range(n + 1):
        for j in range(n + 1):
            for l in range(j):
                s_idx[i, j, l] = len(names)
                names.append(f"s_{i}_{j}_{l}")

    rows = _Rows()
    _add_shape_constraints(rows, n, gi, STRICT)

    # t <= (1-x_i)(1-y_j) + (1-y_j)/n sum_{k<i} g(k, j) + 1/n sum_{l<j} s_i_j_l
    for i in range(n + 1):
        for j in range(n + 1):
            cols = [t_idx] + [gi(k, j) for k in range(i)] + [s_idx[i, j, l] for l in range(j)]
            coefs = [1.0] + [-(n - j) / (n * n)] * i + [-inv] * j
            rows.add(cols, coefs, LE, (n - i) * (n - j) / (n * n))

    if formulation == ENUMERATED:
        # s_i_j_l <= 1 - g(k, l) + 1/n sum_{d<k} g(d, l) + 1/n sum_{k<=d<i} g(d, j)
        for i in range(n + 1):
            for j in range(n + 1):
                for l in range(j):
                    for k in range(i + 1):
                        cols = [s_idx[i, j, l], gi(k, l)]
                        cols += [gi(d, l) for d in range(k)] + [gi(d, j) for d in range(k, i)]
                        coefs = [1.0, 1.0] + [-inv] * i
                        rows.add(cols, coefs, LE, 1.0)
    else:
        for k in range(n + 1):
            for l in range(n):
                cols = [a_idx[k, l], gi(k, l)] + [gi(d, l) for d in range(k)]
                rows.add(cols, [1.0, 1.0] + [-inv] * k, LE, 1.0)
        for i in range(n + 1):
            for j in range(n + 1):
                for l in range(j):
                    s = s_idx[i, j, l]
                    if i > 0:
                        rows.add([s, s_idx[i - 1, j, l], gi(i - 1, j)], [1.0, -1.0, -inv], LE, 0.0)
                    rows.add([s, a_idx[i, l]], [1.0, -1.0], LE, 0.0)

    nv = len(names)
    lower = np.full(nv, -np.inf)
    upper = np.full(nv, np.inf)
    lower[: t_idx] = 0.0
    upper[: t_idx] = 1.0
    obj = np.zeros(nv)
    obj[t_idx] = 1.0
    meta = {"kind": "lower", "n": n, "formulation": formulation}
    return LpModel(tuple(names), lower, upper, rows.matrix(nv), np.array(rows.senses), np.array(rows.rhs), obj, meta)


# ---------------------------------------------------------------------------
# upper bound


@dataclass(frozen=True)
class UpperBoundSpec:
    n: int
    points: tuple = REFERENCE_POINTS
    theta_set: tuple = ("0", "gamma")
    y_slope_last_column: bool = True

    def __post_init__(self):
        pts = tuple((Fraction(x), Fraction(y)) for x, y in self.points)
        for x, y in pts:
            if not (0 <= x <= 1 and 0 <= y <= 1):
                raise ParameterError(f"evaluation point ({x}, {y}) is outside the unit square")
        object.__setattr__(self, "points", pts)

    def grid_points(self) -> list:
        """Nearest n-grid node of every point; exact halves round up."""
        out = []
        for x, y in self.points:
            k = math.floor(x * self.n + Fraction(1, 2))
            l = math.floor(y * self.n + Fraction(1, 2))
            if abs(Fraction(k, self.n) - x) > Fraction(1, 2 * self.n) or \
                    abs(Fraction(l, self.n) - y) > Fraction(1, 2 * self.n):
                raise ParameterError(f"point ({x}, {y}) cannot be rounded onto the {self.n}-grid")
            out.append((k, l))
        return out


def build_upper_lp(spec: UpperBoundSpec) -> LpModel:
    """Relaxation whose optimum upper-bounds the competitive-ratio bound.

    Integrals over x become right Riemann sums, the outer integral over y a
    trapezoid sum plus the ``1/(4n)`` Lipschitz correction, and the inner
    minimum is taken over ``theta in {0, x_k}`` only.
    """
    n = spec.n
    if int(n) != n or n < 2:
        raise ParameterError(f"upper LP needs n >= 2, got {n!r}")
    if not spec.points:
        raise ParameterError("evaluation point set S must be nonempty")
    if tuple(spec.theta_set) != ("0", "gamma"):
        raise ParameterError("only the theta policy {0, gamma} is supported")
    inv = 1.0 / n
    pts = spec.grid_points()
    names, gi = _grid_vars(n)
    t_idx = len(names)
    names.append("t")
    h_idx = {}
    for p, (k, l) in enumerate(pts):
        if l >= 1:
            for j in range(l + 1):
                h_idx[p, j] = len(names)
                names.append(f"h_{p}_{j}")

    rows = _Rows()
    _add_shape_constraints(rows, n, gi, "relaxed", spec.y_slope_last_column)
    for p, (k, l) in enumerate(pts):
        # t <= (1-x_k)(1-y_l) + (1-y_l)/n sum_{i=1..k} g(i, l) + trapezoid(h) + 1/(4n)
        cols = [t_idx] + [gi(i, l) for i in range(1, k + 1)]
        coefs = [1.0] + [-(n - l) / (n * n)] * k
        if l >= 1:
            for j in range(l + 1):
                cols.append(h_idx[p, j])
                coefs.append(-inv / 2 if j in (0, l) else -inv)
        rows.add(cols, coefs, LE, (n - k) * (n - l) / (n * n) + 0.25 * inv)
        if l >= 1:
            for j in range(l + 1):
                h = h_idx[p, j]
                # theta = 0
                rows.add([h, gi(0, j)] + [gi(d, l) for d in range(1, k + 1)], [1.0, 1.0] + [-inv] * k, LE, 1.0)
                if k > 0:
                    # theta = x_k
                    rows.add([h, gi(k, j)] + [gi(d, j) for d in range(1, k + 1)],
                             [1.0, 1.0] + [-inv] * k, LE, 1.0)

    nv = len(names)
    lower = np.full(nv, -np.inf)
    upper = np.full(nv, np.inf)
    lower[:t_idx] = 0.0
    upper[:t_idx] = 1.0
    obj = np.zeros(nv)
    obj[t_idx] = 1.0
    meta = {
        "kind": "upper",
        "n": n,
        "y_slope_rows": "all" if spec.y_slope_last_column else "interior",
        "points": ";".join(f"{x}:{y}" for x, y in spec.points),
        "grid_points": ";".join(f"{k}:{l}" for k, l in pts),
    }
    return LpModel(tuple(names), lower, upper, rows.matrix(nv), np.array(rows.senses), np.array(rows.rhs), obj, meta)


# ---------------------------------------------------------------------------
# direct objective evaluation (independent of the LP machinery)


def lower_objective(grid: GridFunction) -> np.ndarray:
    """f~(x_i, y_j) for every node, evaluated directly from grid values."""
    G = grid.values
    n = grid.n
    out = np.empty((n + 1, n + 1))
    for i in range(n + 1):
        for j in range(n + 1):
            total = (1 - i / n) * (1 - j / n) + (1 - j / n) * math.fsum(G[:i, j]) / n
            inner = []
            for l in range(j):
                cands = [1 - G[k, l] + math.fsum(G[:k, l]) / n + math.fsum(G[k:i, j]) / n for k in range(i + 1)]
                inner.append(min(cands))
            out[i, j] = total + math.fsum(inner) / n
    return out


def upper_objective(grid: GridFunction, spec: UpperBoundSpec) -> list:
    """Upper-LP right-hand side at each evaluation point for a given grid."""
    if grid.n != spec.n:
        raise ParameterError("grid and spec must use the same n")
    G = grid.values
    n = grid.n
    out = []
    for k, l in spec.grid_points():
        base = (1 - k / n) * (1 - l / n) + (1 - l / n) * math.fsum(G[1:k + 1, l]) / n
        h = [min(1 - G[0, j] + math.fsum(G[1:k + 1, l]) / n, 1 - G[k, j] + math.fsum(G[1:k + 1, j]) / n)
             for j in range(l + 1)]
        trap = math.fsum((h[j] + h[j + 1]) / 2 for j in range(l)) / n
        out.append(base + trap + 1 / (4 * n))
    return out


def implied_assignment(model: LpModel, grid: GridFunction, t: float | None = None) -> np.ndarray:
    """Full assignment for ``model`` with g fixed to ``grid``.

    Auxiliaries are set to their implied values (the tightest upper bound
    from rows in which they are the last-declared variable) and ``t`` to the
    tightest bound from its rows unless given.
    """
    x = np.full(model.num_vars, np.nan)
    n = grid.n
    if model.metadata.get("n") != n:
        raise ParameterError("grid size does not match model")
    for i in range(n + 1):
        for j in range(n + 1):
            x[model.var_index[_gname(i, j)]] = grid.values[i, j]
    return _fill_implied(model, x, t)


def _fill_implied(model: LpModel, x: np.ndarray, t: float | None) -> np.ndarray:
    A = model.A.tocsr()
    t_idx = model.var_index["t"]
    nonempty = np.diff(A.indptr) > 0
    last = np.full(A.shape[0], -1)
    if A.nnz:
        last[nonempty] = np.maximum.reduceat(A.indices, A.indptr[:-1][nonempty])
    by_var = {}
    for r, c in enumerate(last):
        by_var.setdefault(int(c), []).append(r)
    if t is not None:
        x[t_idx] = t
    unknown = [int(v) for v in np.flatnonzero(np.isnan(x)) if v != t_idx]
    if np.isnan(x[t_idx]):
        unknown.append(t_idx)  # t is bounded by rows holding every auxiliary
    for v in unknown:
        cand = []
        for r in by_var.get(int(v), ()):
            lo, hi = A.indptr[r], A.indptr[r + 1]
            cols, vals = A.indices[lo:hi], A.data[lo:hi]
            mask = cols != v
            coef = vals[~mask][0]
            if model.senses[r] != LE or coef <= 0:
                continue
            cand.append((model.rhs[r] - vals[mask] @ x[cols[mask]]) / coef)
        if v == t_idx:
            cand += _t_bounds(model, x, t_idx)
        if not cand:
            raise ValidationError(f"cannot infer a value for {model.var_names[v]}")
        x[v] = min(cand)
    return x


def _t_bounds(model, x, t_idx):
    col = model.A.tocsc()[:, t_idx]
    out = []
    A = model.A.tocsr()
    for r in col.indices:
        lo, hi = A.indptr[r], A.indptr[r + 1]
        cols, vals = A.indices[lo:hi], A.data[lo:hi]
        mask = cols != t_idx
        if np.any(np.isnan(x[cols[mask]])):
            continue
        coef = vals[~mask][0]
        out.append((model.rhs[r] - vals[mask] @ x[cols[mask]]) / coef)
    return out


# ---------------------------------------------------------------------------
# solution post-processing


CLAMP_TOLERANCE = 1e-9


def extract_grid_function(sol: LpSolution, n: int) -> GridFunction:
    if sol.status != OPTIMAL:
        raise ParameterError(f"cannot extract g from a {sol.status} solution")
    vals = np.empty((n + 1, n + 1))
    for i in range(n + 1):
        for j in range(n + 1):
            try:
                vals[i, j] = sol.assignment[_gname(i, j)]
            except KeyError as exc:
                raise ParameterError(f"solution lacks {_gname(i, j)}") from exc
    excess = float(np.max(np.maximum(-vals, vals - 1.0)))
    if excess > CLAMP_TOLERANCE:
        raise SolverToleranceError(f"grid value outside [0, 1] by {excess:.3e}", violation=excess)
    return GridFunction(n, np.clip(vals, 0.0, 1.0))


def interior_grid(n: int) -> GridFunction:
    """A grid satisfying every strict condition with slack.

    Samples ``0.5 + 0.1 x - 0.1 y - 0.05 x y``: strictly monotone, slopes far
    below the bounds, and ``g(1, y) - g(x, y) = (1 - x)(0.1 - 0.05 y)`` is
    strictly decreasing in y for x < 1.
    """
    x = np.arange(n + 1)[:, None] / n
    y = np.arange(n + 1)[None, :] / n
    return GridFunction(n, 0.5 + 0.1 * x - 0.1 * y - 0.05 * x * y)


def restore_strict_feasibility(grid: GridFunction, max_weight: float = 1e-3) -> tuple:
    """Blend an LP grid towards :func:`interior_grid` until strict checks pass at 0.

    LP solvers return vertices that satisfy constraints only up to their
    feasibility tolerance.  A convex combination with a point of slack
    ``sigma`` removes violations of size ``eta`` once the weight exceeds
    ``eta / sigma``.  Returns ``(grid, weight)``; the weight is 0 when the
    input already passes.
    """
    if check_conditions(grid, STRICT, 0.0).all_passed:
        return grid, 0.0
    n = grid.n
    core = interior_grid(n)
    eta = max(float(np.max(arr)) for fam in condition_violations(grid, STRICT).values() for _, arr, _ in fam)
    sigma = min(-float(np.max(arr)) for fam in condition_violations(core, STRICT).values()
                for name, arr, _ in fam if name not in ("below 0", "above 1"))
    weight = min(1.0, 2.0 * max(eta, 0.0) / sigma)
    while weight <= max_weight:
        blended = GridFunction(n, np.clip((1.0 - weight) * grid.values + weight * core.values, 0.0, 1.0))
        if check_conditions(blended, STRICT, 0.0).all_passed:
            return blended, weight
        weight *= 2.0
    raise SolverToleranceError(
        f"LP grid violates strict conditions by {eta:.3e}; blending weight would exceed {max_weight:g}",
        violation=eta)
