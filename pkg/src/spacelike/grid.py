"""Structured grids, node masks and finite-difference jets.

Nodes are stored flat in row-major order (last axis fastest).  Interior
nodes own a complete 3^n stencil of non-Excluded neighbours; Boundary
nodes only carry Dirichlet data; Excluded nodes carry nothing.
"""
from __future__ import annotations

import enum
import io
import json
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import EmptyInterior, FieldFormatError, StencilIncomplete
from .expr import Expression, Jet2, eval_value
from .geometry import DEFAULT_GRAD_THRESHOLD
from .table import Table, fmt_real, report_columns, report_row

__all__ = [
    "NodeLabel", "StructuredGrid", "DomainMask", "GridField", "box_mask",
    "sample", "fd_jet2", "fd_jets", "field_report", "mask_spacelike",
    "harmonic_fill", "write_field", "read_field", "format_field", "parse_field",
]


class NodeLabel(enum.IntEnum):
    INTERIOR = 0
    BOUNDARY = 1
    EXCLUDED = 2


_LABEL_NAMES = {NodeLabel.INTERIOR: "interior", NodeLabel.BOUNDARY: "boundary",
                NodeLabel.EXCLUDED: "excluded"}
_LABEL_LOOKUP = {v: k for k, v in _LABEL_NAMES.items()}


@dataclass(frozen=True, eq=False)
class StructuredGrid:
    lo: np.ndarray
    hi: np.ndarray
    shape: tuple[int, ...]

    def __post_init__(self):
        lo = np.array(self.lo, dtype=float).reshape(-1)
        hi = np.array(self.hi, dtype=float).reshape(-1)
        shape = tuple(int(s) for s in np.atleast_1d(self.shape))
        if not (lo.size == hi.size == len(shape)) or lo.size == 0:
            raise ValueError("lo, hi and shape must have the same length n >= 1")
        if not np.all(lo < hi):
            raise ValueError("need lo < hi componentwise")
        if min(shape) < 3:
            raise ValueError("every axis needs at least 3 nodes")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "shape", shape)

    @property
    def n(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> np.ndarray:
        return (self.hi - self.lo) / (np.array(self.shape) - 1)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def strides(self) -> np.ndarray:
        st = np.ones(self.n, dtype=np.int64)
        for a in range(self.n - 2, -1, -1):
            st[a] = st[a + 1] * self.shape[a + 1]
        return st

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(self.lo[a], self.hi[a], self.shape[a]) for a in range(self.n)]

    def coordinates(self) -> np.ndarray:
        """Node coordinates, ``(size, n)`` in storage order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def multi_index(self, flat) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(int(flat), self.shape))

    def flat_index(self, node) -> int:
        if np.ndim(node) == 0:
            flat = int(node)
            if not 0 <= flat < self.size:
                raise IndexError(f"node {flat} outside grid")
            return flat
        return int(np.ravel_multi_index(tuple(int(i) for i in node), self.shape))

    def refined(self) -> "StructuredGrid":
        """Same box with the spacing halved on every axis."""
        return StructuredGrid(self.lo, self.hi, tuple(2 * s - 1 for s in self.shape))

    def __repr__(self):
        return (f"StructuredGrid(lo={self.lo.tolist()}, hi={self.hi.tolist()}, "
                f"shape={self.shape})")


def _neighbour_offsets(grid: StructuredGrid, t: kernels.StencilTables) -> np.ndarray:
    return t.offsets @ grid.strides


@dataclass(frozen=True, eq=False)
class DomainMask:
    labels: np.ndarray   # int8 NodeLabel per node, flat

    def __post_init__(self):
        lab = np.array(self.labels, dtype=np.int8).reshape(-1)
        lab.flags.writeable = False
        object.__setattr__(self, "labels", lab)

    def indices(self, label: NodeLabel) -> np.ndarray:
        return np.flatnonzero(self.labels == label)

    @property
    def interior(self) -> np.ndarray:
        return self.indices(NodeLabel.INTERIOR)

    def counts(self) -> dict[str, int]:
        return {_LABEL_NAMES[k]: int(np.sum(self.labels == k)) for k in NodeLabel}

    def stencil_complete(self, grid: StructuredGrid) -> bool:
        return not _orphans(grid, self.labels).any()


def _on_box_face(grid: StructuredGrid) -> np.ndarray:
    idx = np.indices(grid.shape).reshape(grid.n, -1)
    face = np.zeros(grid.size, dtype=bool)
    for a in range(grid.n):
        face |= (idx[a] == 0) | (idx[a] == grid.shape[a] - 1)
    return face


def _orphans(grid: StructuredGrid, labels: np.ndarray) -> np.ndarray:
    """Interior nodes whose 3^n neighbourhood leaves the grid or hits Excluded."""
    interior = np.flatnonzero(labels == NodeLabel.INTERIOR)
    bad = np.zeros(labels.size, dtype=bool)
    if interior.size == 0:
        return bad
    face = _on_box_face(grid)
    bad[interior[face[interior]]] = True
    inner = interior[~face[interior]]
    t = kernels.stencil_tables(grid.n)
    nb = inner[:, None] + _neighbour_offsets(grid, t)[None, :]
    hit = (labels[nb] == NodeLabel.EXCLUDED).any(axis=1)
    bad[inner[hit]] = True
    return bad


def _complete(grid: StructuredGrid, labels: np.ndarray) -> np.ndarray:
    # one pass suffices: demoting to Boundary never orphans another node
    labels = labels.copy()
    labels[_orphans(grid, labels)] = NodeLabel.BOUNDARY
    return labels


def box_mask(grid: StructuredGrid) -> DomainMask:
    labels = np.where(_on_box_face(grid), NodeLabel.BOUNDARY, NodeLabel.INTERIOR)
    return DomainMask(labels.astype(np.int8))


@dataclass(frozen=True, eq=False)
class GridField:
    grid: StructuredGrid
    values: np.ndarray
    mask: DomainMask

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(-1)
        if vals.size != self.grid.size or self.mask.labels.size != self.grid.size:
            raise ValueError("values/mask size does not match the grid")
        live = self.mask.labels != NodeLabel.EXCLUDED
        if not np.all(np.isfinite(vals[live])):
            raise ValueError("values must be finite on Interior and Boundary nodes")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def with_values(self, values) -> "GridField":
        return GridField(self.grid, values, self.mask)

    def stencil_values(self, nodes=None) -> np.ndarray:
        """Gather the ``(N, 3^n)`` stencil rows for Interior ``nodes``."""
        nodes = self.mask.interior if nodes is None else np.asarray(nodes)
        t = kernels.stencil_tables(self.grid.n)
        return self.values[nodes[:, None] + _neighbour_offsets(self.grid, t)[None, :]]


# ---------------------------------------------------------------------------


def sample(expr: Expression, grid: StructuredGrid,
           mask_rule: Callable[[np.ndarray], np.ndarray] | None = None) -> GridField:
    """Evaluate ``expr`` on the grid.

    ``mask_rule(points) -> bool array`` marks the nodes to keep; the rest are
    Excluded and Interior nodes that lose part of their stencil become
    Boundary nodes.
    """
    if expr.arity != grid.n:
        raise ValueError(f"expression arity {expr.arity} != grid dimension {grid.n}")
    pts = grid.coordinates()
    labels = box_mask(grid).labels.copy()
    if mask_rule is not None:
        keep = np.asarray(mask_rule(pts), dtype=bool).reshape(-1)
        labels[~keep] = NodeLabel.EXCLUDED
        labels = _complete(grid, labels)
    live = labels != NodeLabel.EXCLUDED
    values = np.full(grid.size, np.nan)
    if live.any():
        values[live] = eval_value(expr, pts[live])
    return GridField(grid, values, DomainMask(labels))


def harmonic_fill(grid: StructuredGrid, values, mask: DomainMask) -> GridField:
    """Replace Interior values by the discrete harmonic interpolant of the
    Boundary data (2n+1 point Laplacian with per-axis spacing)."""
    values = np.array(values, dtype=float).reshape(-1)
    nodes = mask.interior
    if nodes.size == 0:
        return GridField(grid, values, mask)
    pos = np.full(grid.size, -1, dtype=np.int64)
    pos[nodes] = np.arange(nodes.size)
    h2 = grid.spacing ** 2
    rows, cols, data = [], [], []
    rhs = np.zeros(nodes.size)
    ar = np.arange(nodes.size)
    rows.append(ar)
    cols.append(ar)
    data.append(np.full(nodes.size, -2.0 * np.sum(1.0 / h2)))
    for a in range(grid.n):
        for step in (1, -1):
            nb = nodes + step * grid.strides[a]
            inner = pos[nb] >= 0
            rows.append(ar[inner])
            cols.append(pos[nb[inner]])
            data.append(np.full(int(inner.sum()), 1.0 / h2[a]))
            rhs[~inner] -= values[nb[~inner]] / h2[a]
    lap = sp.csc_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(nodes.size, nodes.size))
    values[nodes] = spla.spsolve(lap, rhs)
    return GridField(grid, values, mask)


def fd_jets(field: GridField, nodes=None):
    """Central-difference jets at Interior nodes.

    Returns ``(nodes, values, gradients, hessians)``.
    """
    nodes = field.mask.interior if nodes is None else np.asarray(nodes, dtype=np.int64)
    t = kernels.stencil_tables(field.grid.n)
    S = field.stencil_values(nodes)
    grad, hess = kernels.jets_numpy(S, t, field.grid.spacing)
    return nodes, field.values[nodes], grad, hess


def fd_jet2(field: GridField, node_index) -> Jet2:
    flat = field.grid.flat_index(node_index)
    if field.mask.labels[flat] != NodeLabel.INTERIOR:
        label = _LABEL_NAMES[NodeLabel(field.mask.labels[flat])]
        raise StencilIncomplete(f"node {field.grid.multi_index(flat)} is {label}")
    _, v, g, h = fd_jets(field, np.array([flat]))
    return Jet2(v[0], g[0], h[0])


def field_report(field: GridField, grad_threshold: float = DEFAULT_GRAD_THRESHOLD
                 ) -> Table:
    """Curvature-report table over all Interior nodes (fd jets)."""
    nodes, vals, grads, hess = fd_jets(field)
    pts = field.grid.coordinates()[nodes]
    table = Table(report_columns(field.grid.n))
    for k in range(nodes.size):
        table.append(report_row(pts[k], Jet2(vals[k], grads[k], hess[k]), grad_threshold))
    return table


def mask_spacelike(field: GridField, margin: float = 0.0) -> DomainMask:
    """Exclude Interior nodes whose fd gradient has |Du| > 1 - margin."""
    nodes, _, grads, _ = fd_jets(field)
    labels = field.mask.labels.copy()
    too_steep = np.linalg.norm(grads, axis=1) > 1.0 - margin
    labels[nodes[too_steep]] = NodeLabel.EXCLUDED
    labels = _complete(field.grid, labels)
    mask = DomainMask(labels)
    if mask.interior.size == 0:
        raise EmptyInterior("no spacelike Interior nodes remain")
    return mask


# ---------------------------------------------------------------------------
# field file format: one JSON header line, then one CSV record per node


FORMAT_NAME = "spacelike-field"


def format_field(field: GridField, extra: dict | None = None) -> str:
    g = field.grid
    cols = [f"x{i + 1}" for i in range(g.n)] + ["u", "label"]
    header = {"format": FORMAT_NAME, "version": 1, "n": g.n,
              "lo": [fmt_real(v) for v in g.lo], "hi": [fmt_real(v) for v in g.hi],
              "shape": list(g.shape), "columns": cols}
    if extra:
        header["meta"] = extra
    out = io.StringIO()
    out.write(json.dumps(header) + "\n")
    pts = g.coordinates()
    for k in range(g.size):
        rec = [fmt_real(c) for c in pts[k]]
        rec.append(fmt_real(field.values[k]))
        rec.append(_LABEL_NAMES[NodeLabel(field.mask.labels[k])])
        out.write(",".join(rec) + "\n")
    return out.getvalue()


def parse_field(text: str) -> tuple[GridField, dict]:
    """Inverse of :func:`format_field`; returns ``(field, meta)``."""
    lines = text.splitlines()
    if not lines:
        raise FieldFormatError("empty field document")
    try:
        header = json.loads(lines[0])
        n = int(header["n"])
        grid = StructuredGrid([float(v) for v in header["lo"]],
                              [float(v) for v in header["hi"]],
                              tuple(header["shape"]))
    except (ValueError, KeyError, TypeError) as exc:
        raise FieldFormatError(f"bad header: {exc}") from exc
    if header.get("format") != FORMAT_NAME or grid.n != n:
        raise FieldFormatError("not a spacelike field document")
    records = [ln for ln in lines[1:] if ln.strip()]
    if len(records) != grid.size:
        raise FieldFormatError(f"expected {grid.size} records, found {len(records)}")
    values = np.empty(grid.size)
    labels = np.empty(grid.size, dtype=np.int8)
    for k, ln in enumerate(records):
        parts = ln.split(",")
        if len(parts) != n + 2:
            raise FieldFormatError(f"record {k}: expected {n + 2} fields")
        try:
            values[k] = float(parts[n])
            labels[k] = _LABEL_LOOKUP[parts[n + 1].strip()]
        except (ValueError, KeyError) as exc:
            raise FieldFormatError(f"record {k}: {exc}") from exc
    mask = DomainMask(labels)
    try:
        field = GridField(grid, values, mask)
    except ValueError as exc:
        raise FieldFormatError(str(exc)) from exc
    return field, header.get("meta", {})


def write_field(field: GridField, path: str | os.PathLike, extra: dict | None = None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_field(field, extra))


def read_field(path: str | os.PathLike) -> tuple[GridField, dict]:
    with open(path, encoding="utf-8") as fh:
        return parse_field(fh.read())
