"""Analytic graph families with known curvature behaviour.

=================  =====  ===================  =====================
name               n      spacelike where      (minimal, maximal)
=================  =====  ===================  =====================
hyperplane         any    everywhere, |a| < 1  (yes, yes)
helicoid           2      r > |a|, off the cut (yes, yes)
lorentz_catenoid   >= 2   r > 0                (no, yes) for n = 2
scherk             2      tan^2 x1 + tan^2 x2  (yes, no)
                          < 1
paraboloid         any    |x| < 1/(2|c|)       (no, no)
custom             any    |Du| < 1             declared
=================  =====  ===================  =====================

Rotationally symmetric families are written in Cartesian variables so that
everything runs through the single expression/jet path.  The catenoid
a*asinh(r/a) is maximal only in the plane; for n >= 3 it is kept as an
extra control and flagged (no, no).
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.stats import qmc

from . import geometry
from .errors import CatalogError, ExprError, RegionViolation
from .expr import Expression, Jet2, eval_jet2_batch, parse
from .grid import GridField, StructuredGrid, box_mask, harmonic_fill, NodeLabel

__all__ = ["SurfaceFamily", "BUILTINS", "get_surface", "load_custom", "custom_surface",
           "boundary_trace", "sample_points", "check_flags", "jets_at"]

YES, NO, UNKNOWN = "yes", "no", "unknown"
FLAG_NAMES = ("euclidean_minimal", "lorentzian_maximal")
BUILTINS = ("hyperplane", "helicoid", "lorentz_catenoid", "scherk", "paraboloid")


@dataclass(frozen=True, eq=False)
class SurfaceFamily:
    name: str
    n: int
    params: dict[str, float]
    expression: Expression
    region: str
    flags: dict[str, str]
    in_region: Callable[[np.ndarray], np.ndarray]
    box: tuple[np.ndarray, np.ndarray]
    box_check: Callable[[np.ndarray, np.ndarray], str | None] | None = field(
        default=None, repr=False)

    def jet(self, point) -> Jet2:
        v, g, h = eval_jet2_batch(self.expression, np.atleast_2d(point))
        return Jet2(v[0], g[0], h[0])

    def mask_rule(self, points):
        return self.in_region(points)


def jets_at(family: SurfaceFamily, points):
    return eval_jet2_batch(family.expression, np.atleast_2d(points))


def _radius(points, n):
    pts = np.atleast_2d(points)
    return np.sqrt(np.sum(pts[:, :n] ** 2, axis=1))


def _float_params(params: Mapping | None) -> dict:
    out = {}
    for k, v in (params or {}).items():
        if isinstance(v, (list, tuple, np.ndarray)):
            out[k] = [float(x) for x in v]
        else:
            try:
                out[k] = float(v)
            except (TypeError, ValueError) as exc:
                raise CatalogError(f"parameter {k} must be real, got {v!r}") from exc
    return out


def _unknown(params, allowed, name):
    extra = sorted(set(params) - set(allowed))
    if extra:
        raise CatalogError(f"{name}: unknown parameter(s) {', '.join(extra)}")


def _hyperplane(params, n):
    params = dict(params)
    if "a" in params:
        a = params.pop("a")
        a = list(a) if isinstance(a, list) else [a]
        if n is None:
            n = len(a)
        if len(a) != n:
            raise CatalogError(f"hyperplane: 'a' has {len(a)} entries, n = {n}")
        params.update({f"a{i + 1}": v for i, v in enumerate(a)})
    if n is None:
        idx = [int(k[1:]) for k in params if k.startswith("a") and k[1:].isdigit()]
        n = max(idx, default=2)
    allowed = {f"a{i + 1}" for i in range(n)} | {"b"}
    _unknown(params, allowed, "hyperplane")
    coef = [params.get(f"a{i + 1}", 0.0) for i in range(n)]
    b = params.get("b", 0.0)
    if not math.hypot(*coef) < 1.0:
        raise CatalogError("hyperplane: need |a| < 1 to be spacelike")
    bound = {f"a{i + 1}": c for i, c in enumerate(coef)} | {"b": b}
    text = " + ".join(f"a{i + 1}*x{i + 1}" for i in range(n)) + " + b"
    return SurfaceFamily(
        "hyperplane", n, bound, parse(text, n, bound), "everywhere",
        {"euclidean_minimal": YES, "lorentzian_maximal": YES},
        lambda p: np.ones(np.atleast_2d(p).shape[0], dtype=bool),
        (np.full(n, -1.0), np.full(n, 1.0)))


def _helicoid(params, n):
    _unknown(params, {"a"}, "helicoid")
    if n not in (None, 2):
        raise CatalogError("helicoid: n must be 2")
    a = params.get("a", 1.0)
    if a == 0:
        raise CatalogError("helicoid: a must be non-zero")

    def in_region(p):
        p = np.atleast_2d(p)
        cut = (p[:, 0] <= 0) & (p[:, 1] == 0)
        return (_radius(p, 2) > abs(a)) & ~cut

    def box_check(lo, hi):
        # nearest point of the box to the origin
        near = np.clip(0.0, lo, hi)
        if math.hypot(*near) <= abs(a):
            return f"box reaches the non-spacelike disk r <= {abs(a):g}"
        if lo[1] <= 0 <= hi[1] and lo[0] <= 0:
            return "box meets the branch cut {x1 <= 0, x2 = 0}"
        return None

    r = 5 * abs(a)
    return SurfaceFamily(
        "helicoid", 2, {"a": a}, parse("a*atan2(x2, x1)", 2, {"a": a}),
        f"r > {abs(a):g}, excluding x1 <= 0 on x2 = 0",
        {"euclidean_minimal": YES, "lorentzian_maximal": YES},
        in_region, (np.full(2, -r), np.full(2, r)), box_check)


def _catenoid(params, n):
    _unknown(params, {"a"}, "lorentz_catenoid")
    n = 2 if n is None else n
    if n < 2:
        raise CatalogError("lorentz_catenoid: n must be >= 2")
    a = params.get("a", 1.0)
    if not a > 0:
        raise CatalogError("lorentz_catenoid: a must be positive")
    r = "sqrt(" + " + ".join(f"x{i + 1}^2" for i in range(n)) + ")"
    maximal = YES if n == 2 else NO

    def box_check(lo, hi):
        if np.all(lo <= 0) and np.all(0 <= hi):
            return "box contains the singular point r = 0"
        return None

    return SurfaceFamily(
        "lorentz_catenoid", n, {"a": a}, parse(f"a*asinh({r}/a)", n, {"a": a}),
        "r > 0", {"euclidean_minimal": NO, "lorentzian_maximal": maximal},
        lambda p: _radius(p, n) > 0,
        (np.full(n, -4 * a), np.full(n, 4 * a)), box_check)


def _scherk(params, n):
    _unknown(params, set(), "scherk")
    if n not in (None, 2):
        raise CatalogError("scherk: n must be 2")

    def in_region(p):
        p = np.atleast_2d(p)
        inside = np.all(np.abs(p) < math.pi / 2, axis=1)
        with np.errstate(all="ignore"):
            t = np.tan(p[:, 0]) ** 2 + np.tan(p[:, 1]) ** 2
        return inside & (t < 1)

    q = math.pi / 4
    return SurfaceFamily(
        "scherk", 2, {}, parse("log(cos(x2)/cos(x1))", 2),
        "|x1|, |x2| < pi/2 and tan(x1)^2 + tan(x2)^2 < 1",
        {"euclidean_minimal": YES, "lorentzian_maximal": NO},
        in_region, (np.full(2, -q), np.full(2, q)))


def _paraboloid(params, n):
    _unknown(params, {"c"}, "paraboloid")
    n = 2 if n is None else n
    c = params.get("c", 0.5)
    if c == 0:
        raise CatalogError("paraboloid: c must be non-zero")
    text = "c*(" + " + ".join(f"x{i + 1}^2" for i in range(n)) + ")"
    rad = 1 / (2 * abs(c))
    return SurfaceFamily(
        "paraboloid", n, {"c": c}, parse(text, n, {"c": c}), f"|x| < {rad:g}",
        {"euclidean_minimal": NO, "lorentzian_maximal": NO},
        lambda p: _radius(p, n) < rad, (np.full(n, -rad), np.full(n, rad)))


_FACTORIES = {"hyperplane": _hyperplane, "helicoid": _helicoid,
              "lorentz_catenoid": _catenoid, "scherk": _scherk,
              "paraboloid": _paraboloid}


def get_surface(name: str, params: Mapping | None = None, n: int | None = None
                ) -> SurfaceFamily:
    """Look up a built-in family; ``params`` override its defaults."""
    if name not in _FACTORIES:
        raise CatalogError(f"unknown surface {name!r}; built-ins: {', '.join(BUILTINS)}")
    params = _float_params(params)
    if name != "hyperplane" and any(isinstance(v, list) for v in params.values()):
        raise CatalogError(f"{name}: parameters must be scalars")
    return _FACTORIES[name](params, n)


# ---------------------------------------------------------------------------
# custom surfaces


def custom_surface(text: str, n: int, params: Mapping | None = None,
                   name: str = "custom", flags: Mapping | None = None,
                   box=None) -> SurfaceFamily:
    params = _float_params(params)
    try:
        expr = parse(text, n, params)
    except ExprError as exc:
        raise CatalogError(f"{name}: {exc}") from exc
    declared = {k: UNKNOWN for k in FLAG_NAMES}
    for k, v in (flags or {}).items():
        if k not in FLAG_NAMES or v not in (YES, NO, UNKNOWN):
            raise CatalogError(f"{name}: bad flag {k}={v!r}")
        declared[k] = v

    def in_region(p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        ok = np.zeros(p.shape[0], dtype=bool)
        try:
            _, g, _ = eval_jet2_batch(expr, p)
            return np.sum(g * g, axis=1) < 1.0
        except ExprError:
            pass
        for i, pt in enumerate(p):
            try:
                _, g, _ = eval_jet2_batch(expr, pt[None, :])
                ok[i] = float(g[0] @ g[0]) < 1.0
            except ExprError:
                ok[i] = False
        return ok

    if box is None:
        lo, hi = np.full(n, -1.0), np.full(n, 1.0)
    else:
        lo, hi = (np.asarray(b, dtype=float).reshape(n) for b in box)
    return SurfaceFamily(name, n, params, expr, "|Du| < 1 where defined",
                         declared, in_region, (lo, hi))


def load_custom(source: str | os.PathLike | Mapping) -> SurfaceFamily:
    """Load a custom surface from a JSON document (path, text or mapping)::

        {"name": "saddle", "n": 2, "expression": "k*(x1^2 - x2^2)",
         "parameters": {"k": 0.2},
         "flags": {"euclidean_minimal": "unknown", "lorentzian_maximal": "unknown"},
         "box": {"lo": [-1, -1], "hi": [1, 1]}}
    """
    if isinstance(source, Mapping):
        doc = dict(source)
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CatalogError(f"custom surface document is not valid JSON: {exc}") from exc
    try:
        n = int(doc["n"])
        expr_text = str(doc["expression"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CatalogError(f"custom surface document needs 'n' and 'expression': {exc}") from exc
    box = doc.get("box")
    if box is not None:
        box = (box["lo"], box["hi"])
    return custom_surface(expr_text, n, doc.get("parameters"), doc.get("name", "custom"),
                          doc.get("flags"), box)


# ---------------------------------------------------------------------------
# sampling and checks


def sample_points(family: SurfaceFamily, count: int, rng: np.random.Generator,
                  grad_threshold: float = 0.0, lo=None, hi=None,
                  accept: Callable[[np.ndarray], np.ndarray] | None = None,
                  max_rounds: int = 200) -> np.ndarray:
    """Rejection-sample ``count`` points of the spacelike region with
    ``|Du| >= grad_threshold`` from the box ``[lo, hi]`` (default: the
    family's sampling box).  Draw order is deterministic given ``rng``."""
    lo = family.box[0] if lo is None else np.asarray(lo, dtype=float)
    hi = family.box[1] if hi is None else np.asarray(hi, dtype=float)
    out = []
    have = 0
    batch = max(4 * count, 64)
    for _ in range(max_rounds):
        pts = lo + (hi - lo) * rng.random((batch, family.n))
        keep = family.in_region(pts)
        if accept is not None:
            keep &= np.asarray(accept(pts), dtype=bool)
        pts = pts[keep]
        if pts.size:
            _, g, _ = eval_jet2_batch(family.expression, pts)
            p = np.linalg.norm(g, axis=1)
            pts = pts[(p < 1.0) & (p >= grad_threshold)]
        out.append(pts)
        have += len(pts)
        if have >= count:
            break
    pts = np.concatenate(out)[:count] if out else np.empty((0, family.n))
    if len(pts) < count:
        raise CatalogError(f"{family.name}: could only sample {len(pts)} of {count} points")
    return pts


def check_flags(family: SurfaceFamily, count: int = 100, tol: float = 1e-10,
                seed: int = 0) -> dict[str, bool]:
    """Confirm each "yes" flag to ``tol`` and refute each "no" flag at one
    point or more, on ``count`` scrambled-Halton points of the region."""
    lo, hi = family.box
    halton = qmc.Halton(d=family.n, scramble=True, seed=seed)
    pts = np.empty((0, family.n))
    while len(pts) < count:
        cand = qmc.scale(halton.random(8 * count), lo, hi)
        cand = cand[family.in_region(cand)]
        if cand.size:
            _, g, _ = eval_jet2_batch(family.expression, cand)
            cand = cand[np.linalg.norm(g, axis=1) < 1.0]
        pts = np.concatenate([pts, cand])
    pts = pts[:count]
    hr, hl = [], []
    for p in pts:
        jet = family.jet(p)
        hr.append(geometry.mean_curvature_euclidean(jet))
        hl.append(geometry.mean_curvature_lorentzian(jet))
    values = {"euclidean_minimal": np.abs(hr), "lorentzian_maximal": np.abs(hl)}
    verdict = {}
    for k, flag in family.flags.items():
        if flag == YES:
            verdict[k] = bool(np.all(values[k] <= tol))
        elif flag == NO:
            verdict[k] = bool(np.any(values[k] > tol))
    return verdict


def boundary_trace(family: SurfaceFamily, grid: StructuredGrid) -> GridField:
    """Dirichlet data from ``family`` on the box faces of ``grid``.

    Interior values are filled with the discrete harmonic interpolant of
    the boundary data, the solver's default initial guess.
    """
    if grid.n != family.n:
        raise CatalogError(f"grid dimension {grid.n} != surface dimension {family.n}")
    if family.box_check is not None:
        why = family.box_check(grid.lo, grid.hi)
        if why:
            raise RegionViolation(f"{family.name}: {why}")
    mask = box_mask(grid)
    bnodes = mask.indices(NodeLabel.BOUNDARY)
    pts = grid.coordinates()[bnodes]
    ok = family.in_region(pts)
    if ok.any():
        _, g, _ = eval_jet2_batch(family.expression, pts[ok])
        ok[np.flatnonzero(ok)[np.linalg.norm(g, axis=1) >= 1.0]] = False
    if not ok.all():
        first = bnodes[np.flatnonzero(~ok)[0]]
        raise RegionViolation(
            f"{family.name}: boundary node {grid.multi_index(first)} at "
            f"{grid.coordinates()[first].tolist()} is outside the spacelike region")
    values = np.full(grid.size, np.nan)
    values[bnodes] = eval_jet2_batch(family.expression, pts)[0]
    return harmonic_fill(grid, values, mask)
