"""Grid-sampled rank functions and their piecewise-affine extension.

A :class:`GridFunction` stores ``g(i/n, j/n)`` for ``0 <= i, j <= n`` with the
first index running along x (offline rank) and the second along y (arrival
time).  :class:`PiecewiseAffineG` extends it to the unit square by splitting
every grid cell along its anti-diagonal, the edge joining ``(x_{i+1}, y_j)``
and ``(x_i, y_{j+1})``, and interpolating barycentrically on each triangle.

``check_conditions`` verifies the five discrete structural conditions on a
grid.  ``strict`` mode uses the strengthened slope constraints that make the
extension inherit the conditions; ``relaxed`` mode uses the weaker forms that
every smooth admissible ``g`` satisfies by the mean value theorem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .errors import DomainError, ParameterError, ParseError, RangeError

STRICT = "strict"
RELAXED = "relaxed"

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class GridFunction:
    n: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"grid subdivisions must be a positive integer, got {self.n!r}")
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.shape != (self.n + 1, self.n + 1):
            raise ParameterError(f"expected shape {(self.n + 1, self.n + 1)}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise RangeError("grid values must be finite")
        if vals.min() < 0.0 or vals.max() > 1.0:
            i, j = np.unravel_index(np.argmax(np.maximum(-vals, vals - 1.0)), vals.shape)
            raise RangeError(f"grid value {vals[i, j]!r} at ({i}, {j}) is outside [0, 1]")
        vals.setflags(write=False)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "values", vals)

    def __getitem__(self, idx):
        return self.values[idx]

    def __eq__(self, other):
        if not isinstance(other, GridFunction):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.n, self.values.tobytes()))

    def to_csv(self) -> str:
        lines = [f"n={self.n}"]
        for row in self.values:
            lines.append(",".join(format(float(v), ".17g") for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "GridFunction":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("n="):
            raise ParseError("grid file must start with a line 'n=<int>'")
        try:
            n = int(lines[0][2:])
        except ValueError as exc:
            raise ParseError(f"bad header {lines[0]!r}") from exc
        if len(lines) != n + 2:
            raise ParseError(f"expected {n + 1} value rows, found {len(lines) - 1}")
        try:
            rows = [[float(tok) for tok in ln.split(",")] for ln in lines[1:]]
        except ValueError as exc:
            raise ParseError(f"non-numeric grid entry: {exc}") from exc
        if any(len(r) != n + 1 for r in rows):
            raise ParseError(f"every row must hold {n + 1} values")
        return cls(n, np.array(rows))


def write_grid(grid: GridFunction, path) -> None:
    Path(path).write_text(grid.to_csv())


def read_grid(path) -> GridFunction:
    return GridFunction.from_csv(Path(path).read_text())


# ---------------------------------------------------------------------------
# triangulation geometry


@dataclass(frozen=True)
class Location:
    vertices: tuple  # three (i, j) grid indices
    weights: tuple  # barycentric coefficients, same order


def _check_point(x, y):
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise DomainError(f"point ({x!r}, {y!r}) is outside the unit square")


def _cell_coords(t, n):
    """Split ``t = coordinate * n`` into cell index and offset in [0, 1].

    Values within rounding noise of an integer are snapped onto it so that
    grid nodes reproduce stored values exactly.
    """
    t = np.asarray(t, dtype=float)
    r = np.rint(t)
    t = np.where(np.abs(t - r) <= 8 * _EPS * max(1, n), r, t)
    cell = np.clip(np.floor(t), 0, n - 1).astype(np.int64)
    return cell, t - cell


def locate(point, n: int) -> Location:
    """Containing triangle and barycentric weights of ``point`` on the n-grid.

    Points on a shared edge go to the lower-left triangle of their cell.
    """
    x, y = point
    _check_point(x, y)
    if n < 1:
        raise ParameterError("n must be positive")
    ci, u = _cell_coords(x * n, n)
    cj, v = _cell_coords(y * n, n)
    i, j, u, v = int(ci), int(cj), float(u), float(v)
    if u + v <= 1.0:
        return Location(((i, j), (i + 1, j), (i, j + 1)), (1.0 - u - v, u, v))
    return Location(((i + 1, j), (i, j + 1), (i + 1, j + 1)), (1.0 - v, 1.0 - u, u + v - 1.0))


def _interpolate(vals, ci, cj, u, v):
    g00 = vals[ci, cj]
    g10 = vals[ci + 1, cj]
    g01 = vals[ci, cj + 1]
    g11 = vals[ci + 1, cj + 1]
    lower = u + v <= 1.0
    lo = (1.0 - u - v) * g00 + u * g10 + v * g01
    hi = (1.0 - v) * g10 + (1.0 - u) * g01 + (u + v - 1.0) * g11
    return np.where(lower, lo, hi)


@dataclass(frozen=True)
class PiecewiseAffineG:
    grid: GridFunction

    @property
    def n(self) -> int:
        return self.grid.n

    def __call__(self, x, y):
        if np.ndim(x) == 0 and np.ndim(y) == 0:
            return self.eval(x, y)
        return self.evaluate(x, y)

    def eval(self, x: float, y: float) -> float:
        _check_point(x, y)
        n = self.grid.n
        ci, u = _cell_coords(x * n, n)
        cj, v = _cell_coords(y * n, n)
        return float(_interpolate(self.grid.values, ci, cj, u, v))

    def evaluate(self, xs, ys) -> np.ndarray:
        """Vectorized evaluation with numpy broadcasting."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.size and (xs.min() < 0 or xs.max() > 1) or ys.size and (ys.min() < 0 or ys.max() > 1):
            raise DomainError("evaluation points must lie in the unit square")
        n = self.grid.n
        ci, u = _cell_coords(xs * n, n)
        cj, v = _cell_coords(ys * n, n)
        return _interpolate(self.grid.values, ci, cj, u, v)

    def rational_rows(self, rows, N: int) -> np.ndarray:
        """Values at ``(a/N, b/N)`` for ``a`` in ``rows`` and every ``b`` in 0..N.

        Cell indices and offsets come from integer arithmetic, so results are
        exact at nodes shared with the coarse grid.
        """
        n = self.grid.n
        a = np.asarray(rows, dtype=np.int64)
        b = np.arange(N + 1, dtype=np.int64)
        if a.size and (a.min() < 0 or a.max() > N):
            raise DomainError("row index outside 0..N")
        ta, tb = a * n, b * n
        ci = np.minimum(ta // N, n - 1)
        cj = np.minimum(tb // N, n - 1)
        u = (ta - ci * N) / N
        v = (tb - cj * N) / N
        return _interpolate(self.grid.values, ci[:, None], cj[None, :], u[:, None], v[None, :])


# ---------------------------------------------------------------------------
# closed forms


def huang_h(x):
    return np.minimum(1.0, 0.5 * np.exp(x))


def huang_reference(x, y):
    """The rank function ``(h(x) + 1 - h(y)) / 2`` with ``h = min(1, e^x / 2)``."""
    xa, ya = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if np.any((xa < 0) | (xa > 1) | (ya < 0) | (ya > 1)):
        raise DomainError("huang_reference is defined on the unit square only")
    out = 0.5 * (huang_h(xa) + 1.0 - huang_h(ya))
    return float(out) if out.ndim == 0 else out


def sample_closed_form(f: Callable, n: int) -> GridFunction:
    if n < 1:
        raise ParameterError("n must be positive")
    vals = np.empty((n + 1, n + 1))
    for i in range(n + 1):
        for j in range(n + 1):
            vals[i, j] = f(i / n, j / n)
    if vals.min() < 0.0 or vals.max() > 1.0:
        raise RangeError("sampled function leaves [0, 1]")
    return GridFunction(n, vals)


# ---------------------------------------------------------------------------
# condition checking


@dataclass(frozen=True)
class Witness:
    indices: tuple
    violation: float
    detail: str


@dataclass(frozen=True)
class ConditionStatus:
    condition: int
    name: str
    passed: bool
    worst_violation: float
    witness: Witness | None = None


@dataclass(frozen=True)
class ConditionReport:
    mode: str
    tolerance: float
    statuses: tuple

    @property
    def all_passed(self) -> bool:
        return all(s.passed for s in self.statuses)

    def __getitem__(self, condition: int) -> ConditionStatus:
        return self.statuses[condition - 1]

    def failures(self):
        return [s for s in self.statuses if not s.passed]

    def summary(self) -> str:
        lines = [f"mode={self.mode} tolerance={self.tolerance:g}"]
        for s in self.statuses:
            tag = "pass" if s.passed else "FAIL"
            line = f"condition {s.condition} ({s.name}): {tag} worst={s.worst_violation:.3e}"
            if s.witness is not None:
                line += f" at {s.witness.detail}"
            lines.append(line)
        return "\n".join(lines)


def _family(violations, labeller):
    """Worst entry of one constraint family as (violation, witness)."""
    if violations.size == 0:
        return -math.inf, None
    k = int(np.argmax(violations))
    worst = float(violations.flat[k])
    idx = np.unravel_index(k, violations.shape)
    indices, detail = labeller(*idx)
    return worst, Witness(indices, worst, detail)


def condition_violations(g: GridFunction, mode: str = STRICT) -> dict:
    """Signed violations of every discrete condition, grouped per condition.

    Each family maps to an array whose positive entries are violations.  All
    families are written as ``lhs - rhs <= 0``; slope families are in
    derivative units (differences scaled by ``n``).
    """
    if mode not in (STRICT, RELAXED):
        raise ParameterError(f"mode must be {STRICT!r} or {RELAXED!r}")
    G = g.values
    n = g.n
    dx = G[1:, :] - G[:-1, :]  # (n, n+1): g(i+1, j) - g(i, j)
    dy = G[:, 1:] - G[:, :-1]  # (n+1, n): g(i, j+1) - g(i, j)
    fams = {1: [], 2: [], 3: [], 4: [], 5: []}

    fams[1].append(("below 0", -G, lambda i, j: (((i, j),), f"g[{i}][{j}] < 0")))
    fams[1].append(("above 1", G - 1.0, lambda i, j: (((i, j),), f"g[{i}][{j}] > 1")))
    fams[2].append(("x-monotone", -dx, lambda i, j: (((i, j), (i + 1, j)), f"i {i}->{i + 1}, j={j}")))
    fams[2].append(("y-monotone", dy, lambda i, j: (((i, j), (i, j + 1)), f"j {j}->{j + 1}, i={i}")))
    if mode == STRICT:
        fams[3].append(("x-slope", n * dx[:, :-1] - G[:-1, 1:],
                        lambda i, j: (((i, j), (i + 1, j), (i, j + 1)), f"x-slope at i={i}, j={j}")))
        fams[3].append(("x-slope top", n * dx[:, -1] - G[:-1, -1],
                        lambda i: (((i, n), (i + 1, n)), f"x-slope at i={i}, j={n}")))
        fams[4].append(("y-slope", G[1:, :-1] - 1.0 - n * dy[:-1, :],
                        lambda i, j: (((i, j), (i, j + 1), (i + 1, j)), f"y-slope at i={i}, j={j}")))
        fams[4].append(("y-slope right", G[-1, :-1] - 1.0 - n * dy[-1, :],
                        lambda j: (((n, j), (n, j + 1)), f"y-slope at i={n}, j={j}")))
    else:
        fams[3].append(("x-slope", n * dx - G[1:, :],
                        lambda i, j: (((i, j), (i + 1, j)), f"x-slope at i={i}, j={j}")))
        # every column including x = 1: the mean-value argument holds for all x
        fams[4].append(("y-slope", G[:, 1:] - 1.0 - n * dy,
                        lambda i, j: (((i, j), (i, j + 1)), f"y-slope at i={i}, j={j}")))
    # g(n, j) - g(i, j) must not increase from column j to j+1
    gap = G[-1:, :] - G[:-1, :]
    fams[5].append(("diagonal difference", gap[:, 1:] - gap[:, :-1],
                    lambda i, j: (((i, j), (n, j), (i, j + 1), (n, j + 1)), f"i={i}, j {j}->{j + 1}")))
    return fams


_NAMES = {1: "range", 2: "monotonicity", 3: "x-slope bound", 4: "y-slope bound", 5: "diagonal difference"}


def check_conditions(g: GridFunction, mode: str = STRICT, tolerance: float = 0.0) -> ConditionReport:
    if tolerance < 0:
        raise ParameterError("tolerance must be nonnegative")
    fams = condition_violations(g, mode)
    statuses = []
    for cond in range(1, 6):
        worst, witness = -math.inf, None
        for _, arr, labeller in fams[cond]:
            w, wit = _family(arr, labeller)
            if w > worst:
                worst, witness = w, wit
        passed = worst <= tolerance
        statuses.append(ConditionStatus(cond, _NAMES[cond], passed, worst, None if passed else witness))
    return ConditionReport(mode, float(tolerance), tuple(statuses))


def iter_triangles(n: int) -> Iterable[tuple]:
    """All triangles of the anti-diagonal triangulation as vertex-index triples."""
    for i in range(n):
        for j in range(n):
            yield ((i, j), (i + 1, j), (i, j + 1))
            yield ((i + 1, j), (i, j + 1), (i + 1, j + 1))
