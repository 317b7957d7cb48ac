"""Certified evaluation of the competitive-ratio bound for a fixed rank function.

For ``(gamma, tau)`` the computable surrogate is

    fhat = phat + (1/m) sum_{k<j} (qhat(y_k) + qhat(y_{k+1})) / 2
    phat = (1-gamma)(1-tau) + (1-tau)/m sum_{k<i} g(x_k, tau)
    qhat(y) = min_{kappa <= min(i+1, m)} 1 - g(x_kappa, y) + (1/m) sum_{d<kappa} g(x_d, y)
                                      + (1/m) sum_{kappa<=d<i} g(x_d, y_{j+1})

with ``x_k = y_k = k/m`` and ``i, j`` the m-grid cells holding gamma and tau
(``i = m`` at gamma = 1, ``j = m`` at tau = 1 with ``y_{m+1} := 1``).  Over the
sweep set ``{0, 1/n, ..., 1}^2`` its minimum exceeds the true bound by at most
``2/n + 5/(4m)``, so subtracting that budget (and a rounding margin) leaves a
valid lower bound on the competitive ratio.

``qhat`` depends on gamma and tau only through ``(i, j)``, so the trapezoid
term is a table over ``(i, j)`` and each sweep point costs O(1).
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DomainError, ParameterError, ResourceError
from .pwa_grid import PiecewiseAffineG

DEFAULT_MEMORY_CAP = 2 * 1024 ** 3


# ---------------------------------------------------------------------------
# compensated accumulation


def compensated_cumsum(a: np.ndarray, axis: int = 0) -> np.ndarray:
    """Exclusive prefix sums along ``axis`` with Neumaier compensation.

    ``out[k] = sum(a[:k])``; the output has one more entry than ``a`` along
    ``axis``.
    """
    a = np.moveaxis(np.asarray(a, dtype=float), axis, 0)
    out = np.zeros((a.shape[0] + 1,) + a.shape[1:])
    s = np.zeros(a.shape[1:])
    c = np.zeros(a.shape[1:])
    for k in range(a.shape[0]):
        x = a[k]
        t = s + x
        c += np.where(np.abs(s) >= np.abs(x), (s - t) + x, (x - t) + s)
        s = t
        out[k + 1] = s + c
    return np.moveaxis(out, 0, axis)


# ---------------------------------------------------------------------------
# parameters and tables


@dataclass(frozen=True)
class CertifierParams:
    n: int
    m: int
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    numerical_margin: float = 1e-9
    memory_cap: int = DEFAULT_MEMORY_CAP

    def __post_init__(self):
        if self.m < 2:
            raise ParameterError("m must be at least 2")
        if self.n < self.m:
            raise ParameterError("n must be at least m")
        if self.n % self.m:
            raise ParameterError(f"m={self.m} must divide n={self.n}")
        if self.workers < 1:
            raise ParameterError("workers must be positive")
        if self.numerical_margin < 0:
            raise ParameterError("numerical_margin must be nonnegative")

    @property
    def discretization_error(self) -> float:
        return 2.0 / self.n + 5.0 / (4.0 * self.m)


def g_table_bytes(n: int, rows: int | None = None) -> int:
    """Bytes of a float64 g table with ``rows`` rows (default: all n+1)."""
    return 8 * (n + 1 if rows is None else rows) * (n + 1)


def _as_evaluator(g) -> Callable:
    if isinstance(g, PiecewiseAffineG):
        return g
    if callable(g):
        return g
    raise ParameterError("g must be a PiecewiseAffineG or a vectorized callable")


def _rows(g, rows, n) -> np.ndarray:
    if isinstance(g, PiecewiseAffineG):
        return g.rational_rows(rows, n)
    xs = np.asarray(rows, dtype=float)[:, None] / n
    ys = np.arange(n + 1, dtype=float)[None, :] / n
    return np.asarray(g(np.broadcast_to(xs, (len(rows), n + 1)), np.broadcast_to(ys, (len(rows), n + 1))),
                      dtype=float)


@dataclass(frozen=True, eq=False)
class GTable:
    """Values of g at ``(a/n, b/n)``.

    ``row_stride`` is 1 for the full table; the lean table keeps only rows at
    multiples of ``n/m``, which are the only rows the sweep reads.  ``prefix``
    (present when ``m`` is known) holds ``sum_{k<i} g(k/m, b/n)`` for
    ``i = 0..m`` and every column ``b``.
    """

    n: int
    row_stride: int
    values: np.ndarray = field(repr=False)
    m: int | None = None
    prefix: np.ndarray | None = field(default=None, repr=False)
    source: object = field(default=None, repr=False)

    def value(self, a: int, b: int) -> float:
        if a % self.row_stride:
            raise ParameterError(f"row {a} is not stored in a table with stride {self.row_stride}")
        return float(self.values[a // self.row_stride, b])

    def coarse(self) -> np.ndarray:
        """g on the m-grid, indexed ``[kappa, k]``."""
        r = self.n // self.m
        return np.ascontiguousarray(self.values[:: r // self.row_stride, ::r])


def build_g_table(g, n: int, m: int | None = None, *, lean: bool = False, workers: int = 1,
                  memory_cap: int = DEFAULT_MEMORY_CAP) -> GTable:
    if n < 2:
        raise ParameterError("n must be at least 2")
    if m is not None and n % m:
        raise ParameterError(f"m={m} must divide n={n}")
    if lean and m is None:
        raise ParameterError("a lean table needs m")
    stride = n // m if lean else 1
    row_ids = np.arange(0, n + 1, stride)
    need = g_table_bytes(n, len(row_ids)) + (0 if m is None else 8 * (m + 1) * (n + 1))
    if need > memory_cap:
        raise ResourceError(f"g table needs {need} bytes, cap is {memory_cap}", required_bytes=need)
    g = _as_evaluator(g)
    values = np.empty((len(row_ids), n + 1))
    chunks = np.array_split(np.arange(len(row_ids)), max(1, min(len(row_ids), 4 * workers)))

    def fill(idx):
        if idx.size:
            values[idx] = _rows(g, row_ids[idx], n)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(fill, chunks))
    else:
        for idx in chunks:
            fill(idx)
    prefix = None
    if m is not None:
        r = n // m
        prefix = compensated_cumsum(values[: m * (r // stride): r // stride], axis=0)
    values.setflags(write=False)
    return GTable(n, stride, values, m, prefix, g)


@dataclass(frozen=True, eq=False)
class QTable:
    """``qhat`` at m-grid indices ``(i, j, k)`` for ``j`` in ``[j0, j0 + J)``.

    ``values[i, j - j0, k]``; ``i`` indexes the gamma cell, ``j`` the tau cell
    and ``k`` the integration node ``y_k``.
    """

    m: int
    j0: int
    values: np.ndarray = field(repr=False)

    def __getitem__(self, ijk):
        i, j, k = ijk
        return self.values[i, j - self.j0, k]

    def trapezoid(self) -> np.ndarray:
        """``(1/m) sum_{k<j} (q_k + q_{k+1})/2`` for every ``(i, j)`` in the slab."""
        m = self.m
        J = self.values.shape[1]
        js = np.arange(self.j0, self.j0 + J)
        terms = 0.5 * (self.values[:, :, :-1] + self.values[:, :, 1:])  # (i, j, k<m)
        terms = np.where(np.arange(m)[None, None, :] < js[None, :, None], terms, 0.0)
        return compensated_cumsum(terms, axis=2)[:, :, -1] / m


def q_table_bytes(m: int, slab: int | None = None) -> int:
    return 8 * (m + 1) * (m + 1) * (m + 1 if slab is None else slab)


def _candidate_table(Gm: np.ndarray, m: int) -> np.ndarray:
    """``A[kappa, k] = 1 - g(x_kappa, y_k) + (1/m) sum_{d<kappa} g(x_d, y_k)``."""
    return 1.0 - Gm + compensated_cumsum(Gm[:-1], axis=0) / m


def build_q_table(gt: GTable, m: int | None = None, j_range: tuple | None = None,
                  memory_cap: int = DEFAULT_MEMORY_CAP) -> QTable:
    """qhat by the running-minimum recurrence.

    With ``M_i = min_{kappa <= i}`` of the candidate terms,
    ``M_{i+1} = min(M_i + g(x_i, y_{j+1})/m, A[i+1])`` and
    ``qhat(i) = min(M_i, A[i+1])`` (``qhat(m) = M_m``): the candidate
    ``kappa = i+1`` carries an empty trailing sum.
    """
    m = gt.m if m is None else m
    if m is None or gt.n % m:
        raise ParameterError("m must divide the table's n")
    j0, j1 = (0, m + 1) if j_range is None else j_range
    if not 0 <= j0 < j1 <= m + 1:
        raise ParameterError(f"bad j range {(j0, j1)}")
    need = q_table_bytes(m, j1 - j0)
    if need > memory_cap:
        raise ResourceError(f"q table slab needs {need} bytes, cap is {memory_cap}", required_bytes=need)
    Gm = gt.coarse() if gt.m == m else np.ascontiguousarray(gt.values[:: gt.n // m // gt.row_stride, :: gt.n // m])
    A = _candidate_table(Gm, m)
    js = np.arange(j0, j1)
    step = Gm[:, np.minimum(js + 1, m)] / m  # step[d, j] = g(x_d, y_{j+1}) / m
    out = np.empty((m + 1, j1 - j0, m + 1))
    M = np.broadcast_to(A[0], (j1 - j0, m + 1)).copy()
    for i in range(m):
        out[i] = np.minimum(M, A[i + 1][None, :])
        M = np.minimum(M + step[i][:, None], A[i + 1][None, :])
    out[m] = M
    return QTable(m, j0, out)


def brute_force_q(Gm: np.ndarray, m: int, i: int, j: int, k: int) -> float:
    """qhat(i, j, k) straight from its definition."""
    Y = min(j + 1, m)
    best = math.inf
    for kappa in range(min(i + 1, m) + 1):
        term = 1.0 - Gm[kappa, k] + math.fsum(Gm[:kappa, k]) / m + math.fsum(Gm[kappa:i, Y]) / m
        best = min(best, term)
    return best


def trapezoid_table(gt: GTable, memory_cap: int = DEFAULT_MEMORY_CAP) -> np.ndarray:
    """Trapezoid term for every ``(i, j)``, streaming j-slabs through memory."""
    m = gt.m
    slab = max(1, min(m + 1, memory_cap // (4 * q_table_bytes(m, 1))))
    if slab < 1 or 4 * q_table_bytes(m, 1) > memory_cap:
        raise ResourceError("memory cap too small for a single q-table slab", required_bytes=4 * q_table_bytes(m, 1))
    out = np.empty((m + 1, m + 1))
    for j0 in range(0, m + 1, slab):
        j1 = min(m + 1, j0 + slab)
        qt = build_q_table(gt, m, (j0, j1), memory_cap)
        out[:, j0:j1] = qt.trapezoid()
    return out


# ---------------------------------------------------------------------------
# single-point evaluation


@dataclass(frozen=True)
class FhatBreakdown:
    gamma: float
    tau: float
    p_hat: float
    trapezoid: float
    inner_argmins: tuple  # minimizing kappa for each integration node y_0..y_j

    @property
    def value(self) -> float:
        return self.p_hat + self.trapezoid


def _cell(z: float, m: int) -> int:
    return min(math.floor(Fraction(z) * m), m)


def _check_unit(gamma, tau):
    if not (0.0 <= gamma <= 1.0 and 0.0 <= tau <= 1.0):
        raise DomainError(f"({gamma!r}, {tau!r}) is outside the unit square")


def fhat(gamma: float, tau: float, gt: GTable, qt: QTable | None = None, m: int | None = None) -> FhatBreakdown:
    """Evaluate fhat at one point from the tables (diagnostic path)."""
    _check_unit(gamma, tau)
    m = gt.m if m is None else m
    i, j = _cell(gamma, m), _cell(tau, m)
    r = gt.n // m
    Gm = gt.coarse()
    b = Fraction(tau) * gt.n
    if b.denominator == 1:
        col = np.array([gt.value(k * r, int(b)) for k in range(i)])
    else:
        col = np.asarray(gt.source(np.arange(i) / m, np.full(i, float(tau))), dtype=float)
    p_hat = (1 - gamma) * (1 - tau) + (1 - tau) * math.fsum(col) / m
    if qt is None or not (qt.j0 <= j < qt.j0 + qt.values.shape[1]):
        qt = build_q_table(gt, m, (j, j + 1))
    q = qt.values[i, j - qt.j0, : j + 1]
    trap = math.fsum(0.5 * (q[k] + q[k + 1]) for k in range(j)) / m
    Y = min(j + 1, m)
    argmins = []
    for k in range(j + 1):
        terms = [1.0 - Gm[kap, k] + math.fsum(Gm[:kap, k]) / m + math.fsum(Gm[kap:i, Y]) / m
                 for kap in range(min(i + 1, m) + 1)]
        argmins.append(int(np.argmin(terms)))
    return FhatBreakdown(float(gamma), float(tau), p_hat, trap, tuple(argmins))


def fhat_from_definition(g: Callable, gamma: float, tau: float, m: int) -> float:
    """Independent oracle: explicit loops, exact sums, no tables."""
    _check_unit(gamma, tau)
    i, j = _cell(gamma, m), _cell(tau, m)
    Y = min(j + 1, m)
    x = [k / m for k in range(m + 1)]
    p = (1 - gamma) * (1 - tau) + (1 - tau) * math.fsum(float(g(x[k], tau)) for k in range(i)) / m

    def q(yk):
        best = math.inf
        for kappa in range(min(i + 1, m) + 1):
            term = (1.0 - float(g(x[kappa], yk))
                    + math.fsum(float(g(x[d], yk)) for d in range(kappa)) / m
                    + math.fsum(float(g(x[d], x[Y])) for d in range(kappa, i)) / m)
            best = min(best, term)
        return best

    qs = [q(x[k]) for k in range(j + 1)]
    return p + math.fsum(0.5 * (qs[k] + qs[k + 1]) for k in range(j)) / m


class FhatEvaluator:
    """Vectorized fhat at arbitrary points for a fixed g and m."""

    def __init__(self, g, m: int, memory_cap: int = DEFAULT_MEMORY_CAP):
        self.g = _as_evaluator(g)
        self.m = m
        gt = build_g_table(self.g, m, m, memory_cap=memory_cap)
        self.trap = trapezoid_table(gt, memory_cap)

    def __call__(self, gamma, tau) -> np.ndarray:
        gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        if np.any((gamma < 0) | (gamma > 1) | (tau < 0) | (tau > 1)):
            raise DomainError("fhat is defined on the unit square only")
        m = self.m
        i = np.minimum(np.floor(gamma * m).astype(int), m)
        j = np.minimum(np.floor(tau * m).astype(int), m)
        xs = np.arange(m) / m
        vals = np.asarray(self.g(np.broadcast_to(xs[None, :], (tau.size, m)),
                                 np.broadcast_to(tau[:, None], (tau.size, m))), dtype=float)
        vals = np.where(np.arange(m)[None, :] < i[:, None], vals, 0.0)
        p = (1 - gamma) * (1 - tau) + (1 - tau) * compensated_cumsum(vals, axis=1)[:, -1] / m
        return p + self.trap[i, j]


# ---------------------------------------------------------------------------
# the sweep


@dataclass(frozen=True)
class CertifiedBound:
    min_fhat: float
    argmin: tuple  # (gamma, tau)
    argmin_index: tuple  # (a, b) on the n-grid
    discretization_error: float
    numerical_margin: float
    certified_ratio: float
    n: int
    m: int
    workers: int
    wall_seconds: float = 0.0

    def manifest_fields(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "min_fhat": self.min_fhat,
            "argmin_gamma": self.argmin[0],
            "argmin_tau": self.argmin[1],
            "disc_error": self.discretization_error,
            "num_margin": self.numerical_margin,
            "certified_ratio": self.certified_ratio,
            "wall_seconds": self.wall_seconds,
            "workers": self.workers,
        }


def certified_ratio(min_value: float, n: int, m: int, margin: float) -> float:
    return max(0.0, min(1.0, min_value - (2.0 / n + 5.0 / (4.0 * m)) - margin))


def _sweep_chunk(a0, a1, n, r, prefix_rows, trap, m):
    a = np.arange(a0, a1)
    b = np.arange(n + 1)
    i = a // r
    j = b // r
    one_minus_tau = (n - b) / n
    vals = ((n - a)[:, None] * (n - b)[None, :]) / (n * n)
    vals = vals + one_minus_tau[None, :] * prefix_rows[i] / m
    vals = vals + trap[i[:, None], j[None, :]]
    k = int(np.argmin(vals))
    ka, kb = divmod(k, n + 1)
    return float(vals[ka, kb]), int(a[ka]), int(b[kb])


def sweep(g, params: CertifierParams, checkpoint: str | os.PathLike | None = None,
          chunk_rows: int = 64) -> CertifiedBound:
    """Minimize fhat over the n-grid and turn the minimum into a certified ratio.

    Work is split into contiguous gamma-chunks.  Chunk minima are merged by
    ``(value, a, b)`` so the result is independent of worker count and order;
    ties go to the lexicographically smallest point.  With ``checkpoint``,
    finished chunks are appended to a JSON-lines file and skipped on resume.
    """
    start = time.perf_counter()
    n, m = params.n, params.m
    r = n // m
    lean = g_table_bytes(n) + 8 * (m + 1) * (n + 1) > params.memory_cap // 2
    gt = build_g_table(g, n, m, lean=lean, workers=params.workers, memory_cap=params.memory_cap)
    trap = trapezoid_table(gt, params.memory_cap)
    prefix = gt.prefix

    bounds = [(a0, min(n + 1, a0 + chunk_rows)) for a0 in range(0, n + 1, chunk_rows)]
    done = {}
    signature = {"n": n, "m": m, "chunk_rows": chunk_rows}
    if checkpoint is not None and Path(checkpoint).exists():
        for line in Path(checkpoint).read_text().splitlines():
            rec = json.loads(line)
            if rec.get("signature") == signature:
                done[(rec["a0"], rec["a1"])] = (rec["value"], rec["a"], rec["b"])
    todo = [bd for bd in bounds if bd not in done]

    def run(bd):
        return bd, _sweep_chunk(bd[0], bd[1], n, r, prefix, trap, m)

    results = dict(done)
    sink = open(checkpoint, "a") if checkpoint is not None else None
    try:
        if params.workers > 1:
            with ThreadPoolExecutor(params.workers) as pool:
                outs = pool.map(run, todo)
                for bd, res in outs:
                    results[bd] = res
                    if sink:
                        sink.write(json.dumps({"signature": signature, "a0": bd[0], "a1": bd[1],
                                               "value": res[0], "a": res[1], "b": res[2]}) + "\n")
                        sink.flush()
        else:
            for bd in todo:
                _, res = run(bd)
                results[bd] = res
                if sink:
                    sink.write(json.dumps({"signature": signature, "a0": bd[0], "a1": bd[1],
                                           "value": res[0], "a": res[1], "b": res[2]}) + "\n")
                    sink.flush()
    finally:
        if sink:
            sink.close()
    value, a, b = min(results[bd] for bd in bounds)
    return CertifiedBound(
        min_fhat=value,
        argmin=(a / n, b / n),
        argmin_index=(a, b),
        discretization_error=params.discretization_error,
        numerical_margin=params.numerical_margin,
        certified_ratio=certified_ratio(value, n, m, params.numerical_margin),
        n=n,
        m=m,
        workers=params.workers,
        wall_seconds=time.perf_counter() - start,
    )


def fhat_grid(g, n: int, m: int, memory_cap: int = DEFAULT_MEMORY_CAP) -> np.ndarray:
    """fhat at every point of the n-grid as an (n+1) x (n+1) array (small n only)."""
    gt = build_g_table(g, n, m, memory_cap=memory_cap)
    trap = trapezoid_table(gt, memory_cap)
    r = n // m
    a = np.arange(n + 1)
    i = a // r
    vals = ((n - a)[:, None] * (n - a)[None, :]) / (n * n)
    vals = vals + ((n - a) / n)[None, :] * gt.prefix[i] / m
    return vals + trap[i[:, None], i[None, :]]


# ---------------------------------------------------------------------------
# error bounds


def trapezoid_error_bound(L: float, step: float, intervals: int) -> float:
    """Worst-case trapezoid-rule error for an L-Lipschitz integrand."""
    if L < 0 or step <= 0:
        raise ParameterError("need L >= 0 and step > 0")
    return L * intervals * step * step / 4.0


@dataclass(frozen=True)
class LipschitzReport:
    samples: int
    delta: float
    m: int
    seed: int
    gamma_violations: int
    tau_violations: int
    worst_gamma_ratio: float  # observed |diff| / allowed
    worst_tau_ratio: float

    @property
    def passed(self) -> bool:
        return self.gamma_violations == 0 and self.tau_violations == 0


def lipschitz_spot_check(g, samples: int, delta: float, m: int, seed: int = 0,
                         evaluator: FhatEvaluator | None = None) -> LipschitzReport:
    """Compare fhat differences against the 1- and 3-Lipschitz bounds of f.

    Allowed slack is ``5/(2m)``, twice the fhat-versus-f discretization term.
    """
    if not 0 < delta <= 0.1:
        raise ParameterError("delta must lie in (0, 0.1]")
    ev = evaluator or FhatEvaluator(g, m)
    rng = np.random.default_rng(seed)
    gam = rng.uniform(0.0, 1.0 - delta, samples)
    tau = rng.uniform(0.0, 1.0 - delta, samples)
    base = ev(gam, tau)
    dg = np.abs(ev(gam + delta, tau) - base)
    dt = np.abs(ev(gam, tau + delta) - base)
    slack = 5.0 / (2 * m)
    allow_g, allow_t = delta + slack, 3 * delta + slack
    return LipschitzReport(
        samples, delta, m, seed,
        int(np.sum(dg > allow_g)), int(np.sum(dt > allow_t)),
        float(dg.max() / allow_g), float(dt.max() / allow_t),
    )
