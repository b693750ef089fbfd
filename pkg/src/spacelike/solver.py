"""Damped Newton for Dirichlet problems of the three divergence-form PDEs.

    MinimalEuclidean    div(Du / sqrt(1 + |Du|^2)) = 0
    MaximalLorentzian   div(Du / sqrt(1 - |Du|^2)) = 0
    EqualCurvature      div((1/sqrt(1-|Du|^2) - 1/sqrt(1+|Du|^2)) Du) = 0

Residuals are evaluated node by node on central-difference jets.  The
Jacobian is built by forward-differencing each node's residual with respect
to its own 3^n stencil values, then factorised with SuperLU.  EqualCurvature
degenerates (its linearisation loses ellipticity) wherever Du = 0; no
regularisation is attempted and such solves fail loudly.  A Jacobian row
whose largest entry is below ``singular_rtol * max|J|`` carries no
information beyond finite-difference noise, so it is reported as a singular
Jacobian rather than handed to the factorisation.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import NoDescent, NotConverged, SingularJacobian, SpatialityLoss
from .grid import GridField, fd_jets, format_field
from .table import Table

log = logging.getLogger(__name__)

__all__ = ["PDEKind", "SolveConfig", "SolveResult", "assemble_residual",
           "assemble_jacobian", "newton_solve", "history_table"]


class PDEKind(enum.Enum):
    MINIMAL_EUCLIDEAN = "minimal"
    MAXIMAL_LORENTZIAN = "maximal"
    EQUAL_CURVATURE = "equal"

    @property
    def code(self) -> int:
        return {PDEKind.MINIMAL_EUCLIDEAN: kernels.MINIMAL_EUCLIDEAN,
                PDEKind.MAXIMAL_LORENTZIAN: kernels.MAXIMAL_LORENTZIAN,
                PDEKind.EQUAL_CURVATURE: kernels.EQUAL_CURVATURE}[self]

    @property
    def lorentzian(self) -> bool:
        return self is not PDEKind.MINIMAL_EUCLIDEAN

    @classmethod
    def parse(cls, text: str) -> "PDEKind":
        key = text.strip().lower().replace("-", "_")
        aliases = {
            "minimal": cls.MINIMAL_EUCLIDEAN, "minimal_euclidean": cls.MINIMAL_EUCLIDEAN,
            "minimaleuclidean": cls.MINIMAL_EUCLIDEAN, "hr": cls.MINIMAL_EUCLIDEAN,
            "maximal": cls.MAXIMAL_LORENTZIAN, "maximal_lorentzian": cls.MAXIMAL_LORENTZIAN,
            "maximallorentzian": cls.MAXIMAL_LORENTZIAN, "hl": cls.MAXIMAL_LORENTZIAN,
            "equal": cls.EQUAL_CURVATURE, "equal_curvature": cls.EQUAL_CURVATURE,
            "equalcurvature": cls.EQUAL_CURVATURE, "hrhl": cls.EQUAL_CURVATURE,
        }
        if key not in aliases:
            raise ValueError(f"unknown PDE kind {text!r}")
        return aliases[key]


@dataclass(frozen=True)
class SolveConfig:
    residual_tol: float = 1e-10
    max_iterations: int = 50
    spatiality_margin: float = 1e-3
    initial_step: float = 1.0
    step_factor: float = 0.5
    min_step: float = 2.0 ** -20
    jacobian_fd_step: float = 1e-7
    singular_rtol: float = 1e-10
    backend: str | None = None

    def __post_init__(self):
        positive = (self.residual_tol, self.max_iterations, self.spatiality_margin,
                    self.initial_step, self.step_factor, self.min_step,
                    self.jacobian_fd_step)
        if any(not v > 0 for v in positive):
            raise ValueError("solver settings must be positive")
        if not self.singular_rtol >= 0:
            raise ValueError("singular_rtol must be non-negative")
        if not self.residual_tol < 1 or not self.step_factor < 1:
            raise ValueError("residual_tol and step_factor must be < 1")


@dataclass
class SolveResult:
    field: GridField
    residual_norm: float
    iterations: int
    converged: bool
    kind: PDEKind
    step_history: list[tuple[int, float, float]] = field(default_factory=list)

    def to_text(self) -> str:
        meta = {"kind": self.kind.value, "converged": self.converged,
                "iterations": self.iterations,
                "residual_norm": format(self.residual_norm, ".17g")}
        return format_field(self.field, meta)


def history_table(result: SolveResult) -> Table:
    t = Table(["iteration", "residual_norm", "step"])
    for it, norm, step in result.step_history:
        t.append({"iteration": it, "residual_norm": norm, "step": step})
    return t


def _steep_nodes(field: GridField, margin: float) -> np.ndarray:
    nodes, _, grads, _ = fd_jets(field)
    return nodes[np.linalg.norm(grads, axis=1) > 1.0 - margin]


def assemble_residual(field: GridField, kind: PDEKind,
                      config: SolveConfig | None = None) -> np.ndarray:
    """Pointwise residual at every Interior node, in mask order."""
    config = config or SolveConfig()
    if kind.lorentzian:
        bad = _steep_nodes(field, config.spatiality_margin)
        if bad.size:
            raise SpatialityLoss(
                f"{bad.size} Interior node(s) violate |Du| <= 1 - margin",
                nodes=[field.grid.multi_index(b) for b in bad])
    t = kernels.stencil_tables(field.grid.n)
    return kernels.stencil_residual(field.stencil_values(), t, field.grid.spacing,
                                    kind.code, config.backend)


def assemble_jacobian(field: GridField, kind: PDEKind,
                      config: SolveConfig | None = None) -> sp.csr_matrix:
    """Sparse d(residual)/d(Interior values); Boundary columns dropped."""
    config = config or SolveConfig()
    if kind.lorentzian:
        bad = _steep_nodes(field, config.spatiality_margin)
        if bad.size:
            raise SpatialityLoss(
                f"{bad.size} Interior node(s) violate |Du| <= 1 - margin",
                nodes=[field.grid.multi_index(b) for b in bad])
    grid = field.grid
    t = kernels.stencil_tables(grid.n)
    nodes = field.mask.interior
    local = kernels.stencil_jacobian(field.stencil_values(nodes), t, grid.spacing,
                                     kind.code, config.jacobian_fd_step, config.backend)
    pos = np.full(grid.size, -1, dtype=np.int64)
    pos[nodes] = np.arange(nodes.size)
    cols = pos[nodes[:, None] + (t.offsets @ grid.strides)[None, :]]
    rows = np.broadcast_to(np.arange(nodes.size)[:, None], cols.shape)
    keep = cols >= 0
    return sp.csr_matrix((local[keep], (rows[keep], cols[keep])),
                         shape=(nodes.size, nodes.size))


def newton_solve(initial: GridField, kind: PDEKind,
                 config: SolveConfig | None = None) -> SolveResult:
    """Damped Newton iteration with Boundary values held fixed.

    A step ``s * delta`` is accepted for the first ``s`` in
    ``initial_step * step_factor**k`` that strictly lowers the residual
    max-norm and keeps every Interior node at ``|Du| <= 1 - margin``.

    Raises SingularJacobian, NoDescent or NotConverged; each carries the
    last iterate as ``exc.result``.
    """
    config = config or SolveConfig()
    nodes = initial.mask.interior
    bad = _steep_nodes(initial, config.spatiality_margin)
    if bad.size:
        raise SpatialityLoss("initial field violates the spatiality margin",
                             nodes=[initial.grid.multi_index(b) for b in bad])
    current = initial
    r = assemble_residual(current, kind, config)
    norm = float(np.max(np.abs(r))) if r.size else 0.0
    result = SolveResult(current, norm, 0, False, kind, [(0, norm, 0.0)])
    if not np.isfinite(norm):
        raise NotConverged("initial residual is not finite", result=result)

    def fail(exc_type, msg):
        result.field, result.residual_norm = current, norm
        return exc_type(msg, result=result)

    while norm > config.residual_tol:
        if result.iterations >= config.max_iterations:
            raise fail(NotConverged, f"residual {norm:.3e} after "
                                     f"{result.iterations} iterations")
        jac = assemble_jacobian(current, kind, config)
        row_max = abs(jac).max(axis=1).toarray().ravel()
        weak = np.flatnonzero(row_max <= config.singular_rtol * row_max.max())
        if weak.size:
            where = initial.grid.multi_index(nodes[weak[0]])
            raise fail(SingularJacobian,
                       f"{weak.size} degenerate Jacobian row(s), first at node {where} "
                       f"(|Du| ~ 0 makes the equation parabolic there)")
        try:
            delta = spla.splu(jac.tocsc()).solve(-r)
        except RuntimeError as exc:
            raise fail(SingularJacobian, f"factorisation failed: {exc}") from exc
        if not np.all(np.isfinite(delta)):
            raise fail(SingularJacobian, "non-finite Newton direction")
        step = config.initial_step
        while True:
            vals = current.values.copy()
            vals[nodes] += step * delta
            trial = current.with_values(vals)
            if _steep_nodes(trial, config.spatiality_margin).size == 0:
                r_trial = assemble_residual(trial, kind, config)
                n_trial = float(np.max(np.abs(r_trial)))
                if np.isfinite(n_trial) and n_trial < norm:
                    break
            step *= config.step_factor
            if step < config.min_step:
                raise fail(NoDescent, f"no descent at residual {norm:.3e}")
        current, r, norm = trial, r_trial, n_trial
        result.iterations += 1
        result.step_history.append((result.iterations, norm, step))
        log.debug("newton %d: residual %.3e step %g", result.iterations, norm, step)
    result.field, result.residual_norm, result.converged = current, norm, True
    return result

