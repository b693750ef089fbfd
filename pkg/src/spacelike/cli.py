"""Command-line interface.

Commands: eval, identities, theorem, solve, sweep, catalog.
Exit codes: 0 success, 1 failed check or solve, 2 bad input.
"""
from __future__ import annotations

import argparse
import math
import os
import platform
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__, geometry
from .catalog import (BUILTINS, SurfaceFamily, boundary_trace, custom_surface,
                      get_surface, load_custom, sample_points)
from .errors import (CatalogError, DegenerateGradient, ExprError, FieldFormatError,
                     NonSpacelike, SolverError, SpacelikeError)
from .expr import Jet2, eval_jet2_batch, eval_value
from .grid import GridField, StructuredGrid, fd_jets, read_field, sample
from .solver import PDEKind, SolveConfig, history_table, newton_solve
from .table import Table, report_columns, report_row

PRNG_NAME = "numpy.random.Generator(PCG64)"
EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    fmt: str = "csv"
    out: str | None = None
    seed: int = 0
    identity_tol: float = 1e-10
    flat_tol: float = 1e-11
    grad_threshold: float = 1e-3
    fd_constant: float = 10.0

    def __post_init__(self):
        for name in ("identity_tol", "flat_tol", "grad_threshold", "fd_constant"):
            if not getattr(self, name) > 0:
                raise InputError(f"--{name.replace('_', '-')} must be positive")

    def metadata(self, **extra) -> dict:
        meta = {"command": self.command, "config": asdict(self), "seed": self.seed,
                "prng": PRNG_NAME,
                "versions": {"spacelike": __version__, "numpy": np.__version__,
                             "python": platform.python_version()}}
        meta.update(extra)
        return meta


# ---------------------------------------------------------------------------
# argument helpers


def _parse_params(items) -> dict:
    params = {}
    for item in items or []:
        if "=" not in item:
            raise InputError(f"--param expects k=v, got {item!r}")
        k, v = item.split("=", 1)
        try:
            vals = [float(x) for x in v.split(",")]
        except ValueError as exc:
            raise InputError(f"--param {k}: {exc}") from exc
        params[k.strip()] = vals[0] if len(vals) == 1 else vals
    return params


def _vector(text, what):
    try:
        return [float(x) for x in text.split(":")]
    except ValueError as exc:
        raise InputError(f"bad {what} {text!r}") from exc


def parse_grid(text: str) -> StructuredGrid:
    """``LO,HI,SHAPE`` with vector entries separated by ':',
    e.g. ``1.5:-1,4:1,33:17``."""
    parts = text.split(",")
    if len(parts) != 3:
        raise InputError(f"--grid expects LO,HI,SHAPE, got {text!r}")
    lo = _vector(parts[0], "grid lo")
    hi = _vector(parts[1], "grid hi")
    try:
        shape = [int(s) for s in parts[2].split(":")]
        return StructuredGrid(lo, hi, shape)
    except ValueError as exc:
        raise InputError(f"bad --grid: {exc}") from exc


def parse_points(text: str, n: int) -> np.ndarray:
    """Inline ``x1,x2;x1,x2`` or a file with one point per line."""
    if ";" in text or not _is_file(text):
        rows = [r for r in text.split(";") if r.strip()]
    else:
        with open(text, encoding="utf-8") as fh:
            rows = [ln for ln in fh.read().splitlines()
                    if ln.strip() and not ln.lstrip().startswith("#")]
    try:
        pts = np.array([[float(x) for x in r.replace(" ", ",").split(",") if x]
                        for r in rows], dtype=float)
    except ValueError as exc:
        raise InputError(f"bad --points: {exc}") from exc
    if pts.ndim != 2 or pts.shape[1] != n or len(pts) == 0:
        raise InputError(f"--points must be a non-empty list of {n}-vectors")
    return pts


def _is_file(text):
    return os.path.isfile(text)


def surface_from_args(args) -> SurfaceFamily:
    params = _parse_params(args.param)
    chosen = [x is not None for x in (args.surface, args.expr, args.custom)]
    if sum(chosen) != 1:
        raise InputError("give exactly one of --surface, --expr, --custom")
    if args.surface:
        return get_surface(args.surface, params, args.n)
    if args.expr:
        if args.arity is None:
            raise InputError("--expr needs --arity")
        return custom_surface(args.expr, args.arity, params)
    return load_custom(args.custom)


def _emit(cfg: RunConfig, table: Table, **meta):
    text = table.to_json(cfg.metadata(**meta)) if cfg.fmt == "json" else table.to_csv()
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _note(msg):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# jet sources


@dataclass
class JetSet:
    points: np.ndarray
    values: np.ndarray
    grads: np.ndarray
    hessians: np.ndarray
    mode: str            # "analytic" | "fd"
    h: float = 0.0

    def jets(self):
        for k in range(len(self.points)):
            yield self.points[k], Jet2(self.values[k], self.grads[k], self.hessians[k])


def _fd_set(field: GridField) -> JetSet:
    nodes, v, g, h = fd_jets(field)
    return JetSet(field.grid.coordinates()[nodes], v, g, h, "fd",
                  float(np.max(field.grid.spacing)))


def jet_source(args, cfg: RunConfig, default_samples: int | None) -> JetSet:
    if getattr(args, "field", None):
        if any(x is not None for x in (args.surface, args.expr, args.custom)):
            raise InputError("--field cannot be combined with a surface")
        field, _ = read_field(args.field)
        return _fd_set(field)
    fam = surface_from_args(args)
    if args.grid:
        grid = parse_grid(args.grid)
        if grid.n != fam.n:
            raise InputError(f"grid dimension {grid.n} != surface dimension {fam.n}")
        if args.fd:
            return _fd_set(sample(fam.expression, grid, fam.mask_rule))
        pts = grid.coordinates()
        pts = pts[fam.in_region(pts)]
    elif args.points:
        pts = parse_points(args.points, fam.n)
    else:
        count = args.samples if args.samples is not None else default_samples
        if count is None:
            raise InputError("give --points, --grid, --samples or --field")
        rng = np.random.default_rng(cfg.seed)
        pts = sample_points(fam, count, rng, cfg.grad_threshold)
    v, g, h = eval_jet2_batch(fam.expression, pts) if len(pts) else (
        np.empty(0), np.empty((0, fam.n)), np.empty((0, fam.n, fam.n)))
    return JetSet(pts, v, g, h, "analytic")


# ---------------------------------------------------------------------------
# commands


def cmd_eval(args, cfg: RunConfig) -> int:
    src = jet_source(args, cfg, default_samples=None)
    table = Table(report_columns(src.points.shape[1]))
    for pt, jet in src.jets():
        table.append(report_row(pt, jet, cfg.grad_threshold))
    _emit(cfg, table, mode=src.mode)
    return EXIT_OK


def cmd_identities(args, cfg: RunConfig) -> int:
    fam = surface_from_args(args)
    count = args.samples if args.samples is not None else 200
    rng = np.random.default_rng(cfg.seed)
    pts = sample_points(fam, count, rng, cfg.grad_threshold)
    v, g, h = eval_jet2_batch(fam.expression, pts)
    cols = [f"x{i + 1}" for i in range(fam.n)] + [
        "identity", "lhs", "rhs", "abs_error", "applicable", "passed"]
    table = Table(cols)
    n_app = n_pass = n_skip = 0
    for k, pt in enumerate(pts):
        jet = Jet2(v[k], g[k], h[k])
        rep = geometry.check_proof_identities(jet, cfg.identity_tol, cfg.grad_threshold)
        for c in rep:
            row = {f"x{i + 1}": float(x) for i, x in enumerate(pt)}
            row.update(identity=c.name, lhs=c.lhs, rhs=c.rhs, abs_error=c.error,
                       applicable=c.applicable, passed=c.passed)
            table.append(row)
            if c.applicable:
                n_app += 1
                n_pass += bool(c.passed)
            else:
                n_skip += 1
    _emit(cfg, table, surface=fam.name, samples=count)
    _note(f"identities: {n_pass}/{n_app} applicable checks passed, {n_skip} skipped "
          f"(hypotheses not met)")
    return EXIT_OK if n_pass == n_app else EXIT_FAIL


def cmd_theorem(args, cfg: RunConfig) -> int:
    src = jet_source(args, cfg, default_samples=200)
    if src.mode == "fd":
        flat_tol = level_tol = cfg.fd_constant * src.h ** 2
    else:
        flat_tol, level_tol = cfg.flat_tol, cfg.identity_tol
    n = src.points.shape[1]
    if n < 2:
        raise InputError("level hypersurfaces need n >= 2")
    cols = [f"x{i + 1}" for i in range(n)] + [
        "u", "du_norm", "H_R", "H_L", "H_level", "minimal", "maximal",
        "category", "passed"]
    table = Table(cols)
    eligible = failures = controls = far = 0
    for pt, jet in src.jets():
        p = float(np.linalg.norm(jet.gradient))
        if not p < 1.0 or p < cfg.grad_threshold:
            continue
        hr = geometry.mean_curvature_euclidean(jet)
        hl = geometry.mean_curvature_lorentzian(jet)
        hlev = geometry.level_mean_curvature(jet, cfg.grad_threshold)
        minimal, maximal = abs(hr) < flat_tol, abs(hl) < flat_tol
        row = {f"x{i + 1}": float(x) for i, x in enumerate(pt)}
        row.update(u=jet.value, du_norm=p, H_R=hr, H_L=hl, H_level=hlev,
                   minimal=minimal, maximal=maximal)
        if minimal and maximal:
            ok = abs(hlev) <= level_tol
            row.update(category="eligible", passed=ok)
            eligible += 1
            failures += not ok
        else:
            row.update(category="control", passed=None)
            controls += 1
            far += abs(hlev) > level_tol
        table.append(row)
    _emit(cfg, table, mode=src.mode, flat_tol=flat_tol, level_tol=level_tol)
    if eligible == 0:
        _note("theorem: warning: NoEligiblePoints - no point satisfies both "
              "hypotheses")
    else:
        _note(f"theorem: {eligible - failures}/{eligible} eligible points have "
              f"|H_level| <= {level_tol:.3g}")
    _note(f"theorem: {controls} control point(s), {far} with |H_level| > {level_tol:.3g}")
    return EXIT_FAIL if failures else EXIT_OK


def _solver_config(args) -> SolveConfig:
    try:
        return SolveConfig(residual_tol=args.residual_tol, max_iterations=args.max_iterations,
                           spatiality_margin=args.margin)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def cmd_solve(args, cfg: RunConfig) -> int:
    kind = _kind(args.kind)
    fam = surface_from_args(args)
    if not args.grid:
        raise InputError("solve needs --grid")
    grid = parse_grid(args.grid)
    initial = boundary_trace(fam, grid)
    if args.initial:
        supplied, _ = read_field(args.initial)
        if supplied.grid.shape != grid.shape or not (
                np.allclose(supplied.grid.lo, grid.lo) and np.allclose(supplied.grid.hi, grid.hi)):
            raise InputError("--initial field does not match --grid")
        vals = initial.values.copy()
        inner = initial.mask.interior
        vals[inner] = supplied.values[inner]
        initial = initial.with_values(vals)
    scfg = _solver_config(args)
    code = EXIT_OK
    try:
        result = newton_solve(initial, kind, scfg)
    except SolverError as exc:
        _note(f"solve: {type(exc).__name__}: {exc}")
        result = exc.result
        code = EXIT_FAIL
        if result is None:
            return code
    text = result.to_text()
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        hist_path = args.history or cfg.out + ".history.csv"
    else:
        sys.stdout.write(text)
        hist_path = args.history
    if hist_path:
        with open(hist_path, "w", encoding="utf-8") as fh:
            fh.write(history_table(result).to_csv())
    _note(f"solve: {kind.value} converged={result.converged} iterations={result.iterations} "
          f"residual={result.residual_norm:.3e}")
    return code


def _kind(text):
    try:
        return PDEKind.parse(text)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _fd_jet_error(fam: SurfaceFamily, grid: StructuredGrid) -> float:
    field = sample(fam.expression, grid, fam.mask_rule)
    nodes, _, g, h = fd_jets(field)
    _, ga, ha = eval_jet2_batch(fam.expression, grid.coordinates()[nodes])
    return float(max(np.max(np.abs(g - ga)), np.max(np.abs(h - ha))))


def _solve_error(fam: SurfaceFamily, grid: StructuredGrid, kind: PDEKind,
                 scfg: SolveConfig) -> float:
    result = newton_solve(boundary_trace(fam, grid), kind, scfg)
    exact = eval_value(fam.expression, grid.coordinates())
    return float(np.max(np.abs(result.field.values - exact)))


def convergence_table(errors, spacings, exact_floor):
    table = Table(["h", "max_error", "order"])
    orders = []
    for k, (h, e) in enumerate(zip(spacings, errors)):
        order = None
        if k > 0:
            if e <= exact_floor and errors[k - 1] <= exact_floor:
                order = "exact"
            else:
                order = math.log2(errors[k - 1] / e) if e > 0 else math.inf
                orders.append(order)
        table.append({"h": h, "max_error": e, "order": order})
    return table, orders


def cmd_sweep(args, cfg: RunConfig) -> int:
    fam = surface_from_args(args)
    if not args.grid:
        raise InputError("sweep needs --grid")
    grid = parse_grid(args.grid)
    if args.levels < 2:
        raise InputError("--levels must be >= 2")
    grids = [grid]
    for _ in range(args.levels - 1):
        grids.append(grids[-1].refined())
    if args.check == "fd-jets":
        errors = [_fd_jet_error(fam, g) for g in grids]
    else:
        kind = _kind(args.kind)
        scfg = _solver_config(args)
        try:
            errors = [_solve_error(fam, g, kind, scfg) for g in grids]
        except SolverError as exc:
            _note(f"sweep: {type(exc).__name__}: {exc}")
            return EXIT_FAIL
    spacings = [float(np.max(g.spacing)) for g in grids]
    table, orders = convergence_table(errors, spacings, args.exact_floor)
    _emit(cfg, table, check=args.check)
    if orders and min(orders) < args.min_order:
        _note(f"sweep: observed order {min(orders):.3f} below {args.min_order}")
        return EXIT_FAIL
    _note("sweep: " + ("errors at rounding level (exact)" if not orders else
                       f"min observed order {min(orders):.3f}"))
    return EXIT_OK


def cmd_catalog(args, cfg: RunConfig) -> int:
    table = Table(["name", "n", "parameters", "expression", "spacelike_region",
                   "euclidean_minimal", "lorentzian_maximal"])
    for name in BUILTINS:
        fam = get_surface(name)
        table.append({
            "name": name, "n": fam.n,
            "parameters": " ".join(f"{k}={v:g}" for k, v in fam.params.items()),
            "expression": str(fam.expression), "spacelike_region": fam.region,
            "euclidean_minimal": fam.flags["euclidean_minimal"],
            "lorentzian_maximal": fam.flags["lorentzian_maximal"]})
    _emit(cfg, table)
    return EXIT_OK


COMMANDS = {"eval": cmd_eval, "identities": cmd_identities, "theorem": cmd_theorem,
            "solve": cmd_solve, "sweep": cmd_sweep, "catalog": cmd_catalog}


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--identity-tol", type=float, default=1e-10)
    common.add_argument("--flat-tol", type=float, default=1e-11)
    common.add_argument("--grad-threshold", type=float, default=1e-3)
    common.add_argument("--fd-constant", type=float, default=10.0,
                        help="fd tolerance is FD_CONSTANT * h^2")

    surf = argparse.ArgumentParser(add_help=False)
    surf.add_argument("--surface", choices=BUILTINS)
    surf.add_argument("--param", action="append", metavar="K=V")
    surf.add_argument("--n", type=int, help="dimension for families that take one")
    surf.add_argument("--expr", help="custom expression in x1..xn")
    surf.add_argument("--arity", type=int)
    surf.add_argument("--custom", help="custom-surface JSON document")

    where = argparse.ArgumentParser(add_help=False)
    where.add_argument("--points", help="'x1,x2;x1,x2' or a file of points")
    where.add_argument("--grid", help="LO,HI,SHAPE, e.g. 1.5:-1,4:1,33:17")
    where.add_argument("--samples", type=int)
    where.add_argument("--field", help="grid field file (fd jets)")
    where.add_argument("--fd", action="store_true",
                       help="with --grid: sample the surface and use fd jets")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--kind", default="maximal",
                        help="minimal | maximal | equal")
    solver.add_argument("--residual-tol", type=float, default=1e-10)
    solver.add_argument("--max-iterations", type=int, default=50)
    solver.add_argument("--margin", type=float, default=1e-3)

    p = argparse.ArgumentParser(prog="spacelike", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("eval", parents=[common, surf, where],
                   help="curvature report at points or grid nodes")
    s = sub.add_parser("identities", parents=[common, surf],
                       help="check the pointwise normal-curvature relations")
    s.add_argument("--samples", type=int)
    sub.add_parser("theorem", parents=[common, surf, where],
                   help="level sets of minimal+maximal graphs are minimal")
    s = sub.add_parser("solve", parents=[common, surf, solver],
                       help="Dirichlet solve on a grid")
    s.add_argument("--grid")
    s.add_argument("--history", help="convergence history CSV path")
    s.add_argument("--initial", help="field file supplying the Interior initial guess")
    s = sub.add_parser("sweep", parents=[common, surf, solver],
                       help="grid-refinement convergence study")
    s.add_argument("--grid")
    s.add_argument("--check", choices=("fd-jets", "solve"), default="fd-jets")
    s.add_argument("--levels", type=int, default=3)
    s.add_argument("--min-order", type=float, default=1.6)
    s.add_argument("--exact-floor", type=float, default=1e-9)
    sub.add_parser("catalog", parents=[common], help="list built-in surfaces")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = RunConfig(args.command, args.format, args.out, args.seed,
                        args.identity_tol, args.flat_tol, args.grad_threshold,
                        args.fd_constant)
        return COMMANDS[args.command](args, cfg)
    except (InputError, CatalogError, ExprError, FieldFormatError, NonSpacelike,
            DegenerateGradient, OSError, SpacelikeError, ValueError) as exc:
        _note(f"spacelike {args.command}: error: {exc}")
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
