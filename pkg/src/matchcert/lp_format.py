"""Plain-text LP interchange and solver-solution formats.

Model files follow the CPLEX-LP section layout::

    \\ matchcert
    \\ kind=lower
    Maximize
     obj: t
    Subject To
     c0: t - 0.25 g_0_0 <= 1
    Bounds
     0 <= g_0_0 <= 1
     t free
    End

Rows are named ``c<k>`` in model order, one per line.  Coefficients of +-1
are omitted, all other numbers are printed with 17 significant digits so
doubles survive a round trip bit for bit.  Every variable gets an explicit
bounds line, in model order; the parser takes the variable order from it.

Solution files are::

    status optimal
    objective 0.5
    t 0.5
    g_0_0 0.25
    ...
"""

from __future__ import annotations

import io
import math
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ParseError, ValidationError
from .lp_model import EQ, GE, LE, OPTIMAL, STATUSES, LpModel, LpSolution, _fill_implied

AUX_PREFIXES = ("s_", "a_", "h_")
SOLUTION_TOLERANCE = 1e-6


def _num(v: float) -> str:
    v = float(v)
    if v == 0.0:
        return "0"
    if math.isinf(v):
        return "+inf" if v > 0 else "-inf"
    return format(v, ".17g")


def _terms(cols, vals, names) -> str:
    parts = []
    for pos, (c, v) in enumerate(zip(cols, vals)):
        name = names[c]
        if pos == 0:
            if v == 1.0:
                parts.append(name)
            elif v == -1.0:
                parts.append(f"- {name}")
            else:
                parts.append(f"{_num(v)} {name}")
        else:
            sign = "+" if v >= 0 else "-"
            a = abs(v)
            parts.append(f"{sign} {name}" if a == 1.0 else f"{sign} {_num(a)} {name}")
    return " ".join(parts)


def write_interchange(model: LpModel, destination=None) -> str:
    """Serialize ``model``; also write it to ``destination`` (path or file) if given."""
    names = model.var_names
    buf = io.StringIO()
    buf.write("\\ matchcert\n")
    for key in sorted(model.metadata):
        buf.write(f"\\ {key}={model.metadata[key]}\n")
    obj_cols = np.flatnonzero(model.objective)
    buf.write("Maximize\n")
    buf.write(f" obj: {_terms(obj_cols, model.objective[obj_cols], names) if obj_cols.size else '0 ' + names[0]}\n")
    buf.write("Subject To\n")
    A = model.A
    for r in range(A.shape[0]):
        lo, hi = A.indptr[r], A.indptr[r + 1]
        if lo == hi:
            raise ValidationError(f"row c{r} is empty", row=f"c{r}")
        buf.write(f" c{r}: {_terms(A.indices[lo:hi], A.data[lo:hi], names)} {model.senses[r]} {_num(model.rhs[r])}\n")
    buf.write("Bounds\n")
    for name, lb, ub in zip(names, model.lower, model.upper):
        if math.isinf(lb) and math.isinf(ub):
            buf.write(f" {name} free\n")
        elif math.isinf(ub):
            buf.write(f" {name} >= {_num(lb)}\n")
        else:
            buf.write(f" {_num(lb)} <= {name} <= {_num(ub)}\n")
    buf.write("End\n")
    text = buf.getvalue()
    if destination is not None:
        if hasattr(destination, "write"):
            destination.write(text)
        else:
            Path(destination).write_text(text)
    return text


def _parse_expr(tokens, line_no):
    coefs = []
    sign, coef = 1.0, None
    for tok in tokens:
        if tok == "+":
            sign = 1.0
        elif tok == "-":
            sign = -1.0
        else:
            try:
                coef = float(tok)
                continue
            except ValueError:
                pass
            coefs.append((tok, sign * (1.0 if coef is None else coef)))
            sign, coef = 1.0, None
    if coef is not None:
        raise ParseError(f"line {line_no}: dangling coefficient")
    return coefs


def _parse_float(tok, line_no):
    try:
        return float(tok)
    except ValueError as exc:
        raise ParseError(f"line {line_no}: expected a number, got {tok!r}") from exc


def parse_interchange(text: str) -> LpModel:
    section = None
    metadata = {}
    objective_terms = []
    rows = []
    bounds = []
    seen_end = False
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\"):
            body = line[1:].strip()
            if "=" in body:
                key, _, val = body.partition("=")
                metadata[key.strip()] = _coerce(val.strip())
            continue
        low = line.lower()
        if low in ("maximize", "maximise", "max"):
            section = "obj"
            continue
        if low in ("subject to", "st", "s.t."):
            section = "rows"
            continue
        if low == "bounds":
            section = "bounds"
            continue
        if low == "end":
            seen_end = True
            break
        if section == "obj":
            _, _, expr = line.partition(":")
            objective_terms.extend(_parse_expr(expr.split(), line_no))
        elif section == "rows":
            name, colon, body = line.partition(":")
            if not colon:
                raise ParseError(f"line {line_no}: constraint without a name")
            toks = body.split()
            idx = next((k for k, t in enumerate(toks) if t in (LE, GE, EQ, "<", ">", "=<", "=>")), None)
            if idx is None or idx != len(toks) - 2:
                raise ParseError(f"line {line_no}: malformed constraint")
            sense = {"<": LE, "=<": LE, ">": GE, "=>": GE}.get(toks[idx], toks[idx])
            rows.append((name.strip(), _parse_expr(toks[:idx], line_no), sense, _parse_float(toks[-1], line_no)))
        elif section == "bounds":
            toks = line.split()
            if len(toks) == 2 and toks[1].lower() == "free":
                bounds.append((toks[0], -math.inf, math.inf))
            elif len(toks) == 3 and toks[1] == GE:
                bounds.append((toks[0], _parse_float(toks[2], line_no), math.inf))
            elif len(toks) == 3 and toks[1] == LE:
                bounds.append((toks[0], 0.0, _parse_float(toks[2], line_no)))
            elif len(toks) == 5 and toks[1] == LE and toks[3] == LE:
                bounds.append((toks[2], _parse_float(toks[0], line_no), _parse_float(toks[4], line_no)))
            else:
                raise ParseError(f"line {line_no}: malformed bound {line!r}")
        else:
            raise ParseError(f"line {line_no}: content outside any section")
    if not seen_end:
        raise ParseError("missing End marker")

    order = [b[0] for b in bounds]
    index = {name: k for k, name in enumerate(order)}
    for _, terms, _, _ in rows:
        for name, _ in terms:
            if name not in index:
                index[name] = len(order)
                order.append(name)
    nv = len(order)
    lower = np.zeros(nv)
    upper = np.full(nv, np.inf)
    for name, lb, ub in bounds:
        lower[index[name]], upper[index[name]] = lb, ub
    ri, ci, vals, senses, rhs = [], [], [], [], []
    for r, (_, terms, sense, b) in enumerate(rows):
        for name, v in terms:
            ri.append(r)
            ci.append(index[name])
            vals.append(v)
        senses.append(sense)
        rhs.append(b)
    obj = np.zeros(nv)
    for name, v in objective_terms:
        if name not in index:
            raise ParseError(f"objective references undeclared variable {name!r}")
        obj[index[name]] += v
    A = sp.csr_matrix((vals, (ri, ci)), shape=(len(rows), nv))
    return LpModel(tuple(order), lower, upper, A, np.array(senses, dtype="<U2"), np.array(rhs), obj, metadata)


def _coerce(val: str):
    try:
        return int(val)
    except ValueError:
        return val


def read_interchange(path) -> LpModel:
    return parse_interchange(Path(path).read_text())


# ---------------------------------------------------------------------------
# solutions


def format_solution(sol: LpSolution, model: LpModel | None = None) -> str:
    lines = [f"status {sol.status}", f"objective {_num(sol.objective_value)}"]
    names = model.var_names if model is not None else sorted(sol.assignment)
    for name in names:
        if name in sol.assignment:
            lines.append(f"{name} {_num(sol.assignment[name])}")
    return "\n".join(lines) + "\n"


def _is_aux(name: str) -> bool:
    return name.startswith(AUX_PREFIXES)


def parse_solution(text: str, model: LpModel, tolerance: float = SOLUTION_TOLERANCE) -> LpSolution:
    """Read a solver solution and validate it against ``model``.

    Auxiliary variables (``s_``, ``a_``, ``h_``) may be omitted; they are set
    to their implied values.  Every other variable must be present when the
    status is optimal.
    """
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("status"):
        raise ParseError("solution must start with a status line")
    toks = lines[0].split()
    if len(toks) != 2 or toks[1] not in STATUSES:
        raise ParseError(f"bad status line {lines[0]!r}")
    status = toks[1]
    if len(lines) < 2 or not lines[1].startswith("objective"):
        raise ParseError("missing objective line")
    toks = lines[1].split()
    if len(toks) != 2:
        raise ParseError(f"bad objective line {lines[1]!r}")
    objective = _parse_float(toks[1], 2)
    index = model.var_index
    x = np.full(model.num_vars, np.nan)
    for line_no, line in enumerate(lines[2:], 3):
        toks = line.split()
        if len(toks) != 2:
            raise ParseError(f"line {line_no}: expected '<name> <value>'")
        if toks[0] not in index:
            raise ParseError(f"line {line_no}: unknown variable {toks[0]!r}")
        x[index[toks[0]]] = _parse_float(toks[1], line_no)
    if status != OPTIMAL:
        return LpSolution(status, objective, {})
    missing = [name for name, v in zip(model.var_names, x) if np.isnan(v) and not _is_aux(name)]
    if missing:
        raise ParseError(f"solution is missing {len(missing)} variables, e.g. {missing[0]!r}")
    if np.isnan(x).any():
        x = _fill_implied(model, x, None)
    model.validate(x, tolerance)
    return LpSolution(status, objective, dict(zip(model.var_names, x.tolist())))


def read_solution(path, model: LpModel, tolerance: float = SOLUTION_TOLERANCE) -> LpSolution:
    return parse_solution(Path(path).read_text(), model, tolerance)
