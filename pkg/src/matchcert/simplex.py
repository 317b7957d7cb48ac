"""Dense two-phase tableau simplex with Bland's rule.

Meant for the small models used in tests and cross-checks.  Pivoting is
deterministic: the entering column is the lowest-index column with positive
reduced cost and ties in the ratio test go to the lowest-index basic
variable, so identical models always follow the same pivot path.

Degenerate models (the lower LPs are highly degenerate) make plain tableau
updates drift; every ``REFACTOR_EVERY`` pivots, and before any status is
reported, the tableau is rebuilt from the original matrix and the current
basis, which keeps rounding error from compounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BackendError, ResourceError
from .lp_model import EQ, GE, INFEASIBLE, LE, OPTIMAL, UNBOUNDED, LpModel

PIVOT_TOL = 1e-9
COST_TOL = 1e-9
MAX_TABLEAU_BYTES = 2 * 1024 ** 3
REFACTOR_EVERY = 50


@dataclass
class _Standard:
    """``max c.z  s.t.  M z = b, z >= 0`` plus the map back to model variables."""

    M: np.ndarray
    b: np.ndarray
    c: np.ndarray
    basis: list
    n_struct: int  # columns before artificials
    n_art: int
    recover: list  # per model variable: (offset, [(col, sign), ...])


def _standardize(model: LpModel) -> _Standard:
    A = model.A.toarray()
    m, nv = A.shape
    cols = []  # columns of the transformed structural part
    recover = []
    shift = np.zeros(nv)
    extra_rows = []  # (col_index, upper) for x' <= ub - lb
    for k in range(nv):
        lb, ub = model.lower[k], model.upper[k]
        if math.isfinite(lb):
            shift[k] = lb
            recover.append((lb, [(len(cols), 1.0)]))
            if math.isfinite(ub):
                extra_rows.append((len(cols), ub - lb))
            cols.append((k, 1.0))
        elif math.isfinite(ub):
            shift[k] = ub
            recover.append((ub, [(len(cols), -1.0)]))
            cols.append((k, -1.0))
        else:
            recover.append((0.0, [(len(cols), 1.0), (len(cols) + 1, -1.0)]))
            cols.append((k, 1.0))
            cols.append((k, -1.0))
    ns = len(cols)
    rows_total = m + len(extra_rows)
    S = np.zeros((rows_total, ns))
    for jcol, (k, sgn) in enumerate(cols):
        S[:m, jcol] = sgn * A[:, k]
    senses = list(model.senses)
    rhs = list(model.rhs - A @ shift)
    c = np.array([sgn * model.objective[k] for k, sgn in cols])
    for r, (jcol, cap) in enumerate(extra_rows):
        S[m + r, jcol] = 1.0
        senses.append(LE)
        rhs.append(cap)
    rhs = np.array(rhs, dtype=float)

    n_slack = sum(1 for s in senses if s != EQ)
    width = ns + n_slack + rows_total
    if 8.0 * (rows_total + 1) * (width + 1) > MAX_TABLEAU_BYTES:
        raise ResourceError(
            f"dense tableau of {rows_total}x{width} exceeds {MAX_TABLEAU_BYTES} bytes",
            required_bytes=int(8 * (rows_total + 1) * (width + 1)))
    M = np.zeros((rows_total, ns + n_slack))
    M[:, :ns] = S
    slack_of_row = {}
    col = ns
    for r, s in enumerate(senses):
        if s == LE:
            M[r, col] = 1.0
        elif s == GE:
            M[r, col] = -1.0
        if s != EQ:
            slack_of_row[r] = col
            col += 1
    neg = rhs < 0
    M[neg] *= -1.0
    rhs[neg] *= -1.0
    basis = [-1] * rows_total
    art_rows = []
    for r in range(rows_total):
        sc = slack_of_row.get(r)
        if sc is not None and M[r, sc] == 1.0:
            basis[r] = sc
        else:
            art_rows.append(r)
    n_struct = M.shape[1]
    art = np.zeros((rows_total, len(art_rows)))
    for a, r in enumerate(art_rows):
        art[r, a] = 1.0
        basis[r] = n_struct + a
    M = np.hstack([M, art])
    c_full = np.concatenate([c, np.zeros(M.shape[1] - ns)])
    return _Standard(M, rhs, c_full, basis, n_struct, len(art_rows), recover)


def _refactor(T, basis, M0, b0) -> None:
    """Recompute ``T = B^-1 [M0 | b0]`` for the current basis, in place."""
    B = M0[:, basis]
    T[:, :-1] = np.linalg.solve(B, M0)
    T[:, -1] = np.linalg.solve(B, b0)
    T[np.abs(T) < 1e-14] = 0.0
    # primal values are nonnegative in exact arithmetic; drop round-off below zero
    rhs = T[:, -1]
    rhs[(rhs < 0) & (rhs > -1e-9)] = 0.0


def _run(T, basis, cost, allowed, max_iter, M0, b0):
    """Maximize ``cost`` over the tableau ``T`` (last column = rhs) in place."""
    m = T.shape[0]
    since_refactor = 0
    for it in range(max_iter):
        cb = cost[basis]
        reduced = cost - cb @ T[:, :-1]
        reduced[~allowed] = 0.0
        reduced[basis] = 0.0
        enter = np.flatnonzero(reduced > COST_TOL)
        if enter.size == 0:
            if since_refactor:
                _refactor(T, basis, M0, b0)
                since_refactor = 0
                continue
            return OPTIMAL, it
        j = int(enter[0])
        colj = T[:, j]
        pos = np.flatnonzero(colj > PIVOT_TOL)
        if pos.size == 0:
            if since_refactor:
                _refactor(T, basis, M0, b0)
                since_refactor = 0
                continue
            return UNBOUNDED, it
        ratios = np.maximum(T[pos, -1], 0.0) / colj[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = int(min(ties, key=lambda row: basis[row]))
        T[r] /= T[r, j]
        others = np.arange(m) != r
        T[others] -= np.outer(T[others, j], T[r])
        basis[r] = j
        since_refactor += 1
        if since_refactor >= REFACTOR_EVERY:
            _refactor(T, basis, M0, b0)
            since_refactor = 0
    raise BackendError(f"simplex did not converge in {max_iter} pivots")


def solve_dense(model: LpModel, max_iter: int = 200000):
    """Return ``(status, objective, x)``; ``x`` is None unless optimal."""
    std = _standardize(model)
    T = np.hstack([std.M, std.b[:, None]])
    basis = list(std.basis)
    ncols = std.M.shape[1]
    is_art = np.zeros(ncols, dtype=bool)
    is_art[std.n_struct:] = True

    if std.n_art:
        phase1 = np.where(is_art, -1.0, 0.0)
        _run(T, basis, phase1, np.ones(ncols, dtype=bool), max_iter, std.M, std.b)
        infeas = float(sum(T[r, -1] for r, bv in enumerate(basis) if is_art[bv]))
        if infeas > 1e-7 * max(1.0, float(np.abs(std.b).max(initial=0.0))):
            return INFEASIBLE, math.nan, None
        # drive remaining (zero-level) artificials out of the basis
        keep = []
        for r in range(T.shape[0]):
            if not is_art[basis[r]]:
                keep.append(r)
                continue
            cand = np.flatnonzero(np.abs(T[r, :std.n_struct]) > PIVOT_TOL)
            if cand.size == 0:
                continue  # redundant row
            j = int(cand[0])
            T[r] /= T[r, j]
            others = np.arange(T.shape[0]) != r
            T[others] -= np.outer(T[others, j], T[r])
            basis[r] = j
            keep.append(r)
        T = T[keep]
        basis = [basis[r] for r in keep]
        M0, b0 = std.M[keep], std.b[keep]
    else:
        M0, b0 = std.M, std.b
    status, _ = _run(T, basis, std.c, ~is_art, max_iter, M0, b0)
    if status != OPTIMAL:
        return status, math.nan, None
    z = np.zeros(ncols)
    for r, bv in enumerate(basis):
        z[bv] = T[r, -1]
    x = np.empty(model.num_vars)
    for k, (offset, parts) in enumerate(std.recover):
        x[k] = offset + sum(sgn * z[col] for col, sgn in parts)
    return OPTIMAL, float(model.objective @ x), x
