"""Command-line front end.

Subcommands: lp-build, lp-solve, g-check, certify, simulate, contour.  Every
command writes a run manifest (key=value lines) into ``--manifest-dir``,
named by the digest of its content and never overwritten.

Rank functions are given as a grid CSV path, or as ``huang`` (the analytic
reference) or ``huang:N`` (the reference sampled on the N-grid and extended
piecewise affinely).

Exit codes: 0 success, 1 a checked grid violates a condition, 2 usage or
parameter error, 3 resource error, 4 solver failure.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .certifier import DEFAULT_MEMORY_CAP, CertifierParams, sweep
from .errors import MatchCertError, ParameterError, ParseError, ResourceError
from .lp_format import format_solution, read_interchange, write_interchange
from .lp_model import (ENUMERATED, OPTIMAL, REFERENCE_POINTS, RECURRENCE, UpperBoundSpec, build_lower_lp,
                       build_upper_lp, extract_grid_function, restore_strict_feasibility)
from .pwa_grid import RELAXED, STRICT, PiecewiseAffineG, check_conditions, huang_reference, read_grid, \
    sample_closed_form, write_grid
from .ranking_sim import erdos_renyi, estimate_ratio, read_instance, star, upper_triangular
from .solver_backend import EMBEDDED, EXTERNAL, HIGHS, SolverConfig, solve


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    parameters: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)  # name -> sha256
    outputs: dict = field(default_factory=dict)
    wall_seconds: float = 0.0

    def to_text(self) -> str:
        lines = [f"command={self.command}", f"version={__version__}"]
        lines += [f"param.{k}={_fmt(v)}" for k, v in self.parameters.items()]
        lines += [f"input.{k}={v}" for k, v in self.inputs.items()]
        lines += [f"{k}={_fmt(v)}" for k, v in self.outputs.items()]
        lines.append(f"wall_seconds={_fmt(self.wall_seconds)}")
        return "\n".join(lines) + "\n"

    def write(self, directory) -> Path:
        text = self.to_text()
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / f"{self.command}-{hashlib.sha256(text.encode()).hexdigest()[:16]}.manifest"
        if not path.exists():
            path.write_text(text)
        return path


def parse_manifest(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        if line.strip():
            key, sep, value = line.partition("=")
            if not sep:
                raise ParseError(f"manifest line without '=': {line!r}")
            out[key] = value
    return out


def load_rank_function(spec: str):
    """Return ``(callable g, label, digest or None)`` for a rank-function argument."""
    if spec == "huang":
        return huang_reference, "huang", None
    if spec.startswith("huang:"):
        try:
            n = int(spec.split(":", 1)[1])
        except ValueError as exc:
            raise ParameterError(f"bad sample size in {spec!r}") from exc
        if n < 1:
            raise ParameterError("sample size must be positive")
        return PiecewiseAffineG(sample_closed_form(huang_reference, n)), spec, None
    path = Path(spec)
    if not path.exists():
        raise ParameterError(f"rank function file {spec!r} does not exist")
    return PiecewiseAffineG(read_grid(path)), str(path), file_digest(path)


def _read_points(path) -> tuple:
    pts = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            x, y = line.replace(",", " ").split()
            pts.append((Fraction(x), Fraction(y)))
    if not pts:
        raise ParameterError("point file is empty")
    return tuple(pts)


# ---------------------------------------------------------------------------
# subcommands


def cmd_lp_build(args) -> tuple:
    if args.n < 2:
        raise ParameterError(f"n must be at least 2, got {args.n}")
    params = {"kind": args.kind, "n": args.n}
    inputs = {}
    if args.kind == "lower":
        model = build_lower_lp(args.n, args.formulation)
        params["formulation"] = args.formulation
    else:
        points = REFERENCE_POINTS if args.points is None else _read_points(args.points)
        if args.points:
            inputs["points"] = file_digest(args.points)
        model = build_upper_lp(UpperBoundSpec(args.n, points, y_slope_last_column=not args.y_slope_interior_only))
        params["y_slope_interior_only"] = args.y_slope_interior_only
    write_interchange(model, args.out)
    outputs = {"variables": model.num_vars, "constraints": model.num_constraints,
               "out": args.out, "out_sha256": file_digest(args.out)}
    print(f"wrote {args.out}: {model.num_vars} variables, {model.num_constraints} constraints")
    return params, inputs, outputs


def cmd_lp_solve(args) -> tuple:
    model = read_interchange(args.model)
    config = SolverConfig(args.backend, args.solver_command, args.time_limit, args.tolerance)
    sol = solve(model, config)
    params = {"backend": args.backend, "time_limit": args.time_limit, "tolerance": args.tolerance}
    inputs = {"model": file_digest(args.model)}
    outputs = {"status": sol.status}
    if args.out:
        Path(args.out).write_text(format_solution(sol, model))
        outputs["out"] = args.out
    if sol.status != OPTIMAL:
        print(sol.status)
        return params, inputs, outputs, 4
    outputs["objective"] = sol.objective_value
    if args.grid_out:
        n = int(model.metadata.get("n", 0))
        grid = extract_grid_function(sol, n)
        if model.metadata.get("kind") == "lower":
            grid, weight = restore_strict_feasibility(grid)
            outputs["blend_weight"] = weight
        write_grid(grid, args.grid_out)
        outputs["grid_out"] = args.grid_out
        outputs["grid_sha256"] = file_digest(args.grid_out)
    print(_fmt(sol.objective_value))
    return params, inputs, outputs


def cmd_g_check(args) -> tuple:
    grid = read_grid(args.grid)
    report = check_conditions(grid, args.mode, args.tolerance)
    print(report.summary())
    params = {"mode": args.mode, "tolerance": args.tolerance}
    outputs = {"all_passed": report.all_passed}
    for st in report.statuses:
        outputs[f"condition{st.condition}"] = "pass" if st.passed else f"fail {st.worst_violation:.17g}"
    return params, {"grid": file_digest(args.grid)}, outputs, (0 if report.all_passed else 1)


def cmd_certify(args) -> tuple:
    g, label, digest = load_rank_function(args.g)
    params = CertifierParams(args.n, args.m, args.workers or os.cpu_count() or 1, args.margin, args.memory_cap)
    result = sweep(g, params, checkpoint=args.checkpoint)
    outputs = {"g_source": label, **result.manifest_fields()}
    wall = outputs.pop("wall_seconds")
    if args.out:
        lines = [f"{k}={_fmt(v)}" for k, v in outputs.items()] + [f"wall_seconds={_fmt(wall)}"]
        Path(args.out).write_text("\n".join(lines) + "\n")
    print(_fmt(result.certified_ratio))
    inputs = {"g": digest} if digest else {}
    return {"n": args.n, "m": args.m, "workers": params.workers, "margin": args.margin}, inputs, outputs


def _instance_source(args):
    if args.instance:
        return read_instance(args.instance)
    fam = args.family
    if fam == "upper-triangular":
        return upper_triangular(args.size)
    if fam == "erdos-renyi":
        return lambda rng: erdos_renyi(args.size, args.size, args.p, rng)
    if fam == "star":
        return lambda rng: star(args.size, rng)
    raise ParameterError("give --instance or --family")


def cmd_simulate(args) -> tuple:
    g, label, digest = load_rank_function(args.g)
    source = _instance_source(args)
    est = estimate_ratio(source, g, args.trials, args.seed, args.workers)
    params = {"g": label, "trials": args.trials, "seed": args.seed}
    inputs = {}
    if args.instance:
        inputs["instance"] = file_digest(args.instance)
    else:
        params.update(family=args.family, size=args.size, p=args.p)
    if digest:
        inputs["g"] = digest
    outputs = {"mean_ratio": est.mean_ratio, "stderr": est.stderr, "min_ratio": est.min_ratio,
               "skipped": est.skipped, "max_dual_gap": est.max_dual_gap}
    for k, v in outputs.items():
        print(f"{k}={_fmt(v)}")
    return params, inputs, outputs


def cmd_contour(args) -> tuple:
    if args.resolution < 2:
        raise ParameterError("resolution must be at least 2")
    g, label, digest = load_rank_function(args.g)
    axis = np.linspace(0.0, 1.0, args.resolution)
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    vals = np.asarray(g(X.ravel(), Y.ravel()), dtype=float)
    with open(args.out, "w") as fh:
        fh.write("x,y,g\n")
        for x, y, v in zip(X.ravel(), Y.ravel(), vals):
            fh.write(f"{x:.17g},{y:.17g},{v:.17g}\n")
    return ({"g": label, "resolution": args.resolution}, {"g": digest} if digest else {},
            {"out": args.out, "out_sha256": file_digest(args.out)})


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="matchcert", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--manifest-dir", default="manifests", help="where run manifests are stored")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lp-build", help="write the lower or upper LP in interchange format")
    p.add_argument("--kind", choices=["lower", "upper"], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--formulation", choices=[ENUMERATED, RECURRENCE], default=ENUMERATED)
    p.add_argument("--points", help="upper LP evaluation points, one 'x y' pair of fractions per line")
    p.add_argument("--y-slope-interior-only", action="store_true",
                   help="upper LP: omit relaxed y-slope rows on the column x = 1")
    p.set_defaults(func=cmd_lp_build)

    p = sub.add_parser("lp-solve", help="solve an interchange LP file")
    p.add_argument("model")
    p.add_argument("--backend", choices=[EMBEDDED, EXTERNAL, HIGHS], default=EXTERNAL)
    p.add_argument("--solver-command", help="external command template with {in} and {out}")
    p.add_argument("--time-limit", type=float, default=3600.0)
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--out", help="solution file")
    p.add_argument("--grid-out", help="write the solved g grid as CSV")
    p.set_defaults(func=cmd_lp_solve)

    p = sub.add_parser("g-check", help="check conditions 1-5 on a grid")
    p.add_argument("grid")
    p.add_argument("--mode", choices=[STRICT, RELAXED], default=STRICT)
    p.add_argument("--tolerance", type=float, default=0.0)
    p.set_defaults(func=cmd_g_check)

    p = sub.add_parser("certify", help="certified competitive-ratio bound for a rank function")
    p.add_argument("g")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--workers", type=int, default=0, help="0 means all available cores")
    p.add_argument("--margin", type=float, default=1e-9)
    p.add_argument("--memory-cap", type=int, default=DEFAULT_MEMORY_CAP)
    p.add_argument("--checkpoint", help="JSON-lines file of finished gamma-chunks (resumable)")
    p.add_argument("--out", help="result manifest path")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("simulate", help="Monte Carlo competitive ratio of generalized RANKING")
    p.add_argument("--g", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--instance")
    src.add_argument("--family", choices=["upper-triangular", "erdos-renyi", "star"])
    p.add_argument("--size", type=int, default=20)
    p.add_argument("--p", type=float, default=0.3)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("contour", help="sample a rank function on a square grid as CSV")
    p.add_argument("g")
    p.add_argument("--resolution", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_contour)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        result = args.func(args)
    except MatchCertError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except MemoryError:
        print("error: out of memory", file=sys.stderr)
        return ResourceError.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    params, inputs, outputs, *code = result
    manifest = RunManifest(args.command, params, inputs, outputs, time.perf_counter() - start)
    manifest.write(args.manifest_dir)
    return code[0] if code else 0


if __name__ == "__main__":
    sys.exit(main())
