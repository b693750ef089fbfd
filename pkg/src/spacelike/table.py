"""Row tables with deterministic CSV / JSON rendering."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import NonSpacelike
from .expr import Jet2
from . import geometry

__all__ = ["Table", "fmt_real", "report_columns", "report_row"]


def fmt_real(x) -> str:
    """17 significant digits; round-trips every double exactly."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_real(v)
    return str(v)


def _json_value(v):
    if v is None:
        return None
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        # json has no nan/inf; keep them readable as strings
        return v if math.isfinite(v) else fmt_real(v)
    return v


@dataclass
class Table:
    columns: list[str]
    rows: list[dict[str, Any]] = field(default_factory=list)

    def append(self, row: dict[str, Any]) -> None:
        self.rows.append(row)

    def column(self, name) -> list:
        return [r.get(name) for r in self.rows]

    def __len__(self):
        return len(self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_cell(r.get(c)) for c in self.columns])
        return buf.getvalue()

    def to_json(self, metadata: dict | None = None) -> str:
        doc = {
            "metadata": metadata or {},
            "rows": [{c: _json_value(r.get(c)) for c in self.columns} for r in self.rows],
        }
        return json.dumps(doc, indent=1, sort_keys=False) + "\n"


def report_columns(n: int) -> list[str]:
    return [f"x{i + 1}" for i in range(n)] + [
        "u", "du_norm", "cos_theta", "cosh_psi", "A", "H_R", "H_L",
        "residual", "H_level", "flags"]


def report_row(point, jet: Jet2, grad_threshold: float) -> dict[str, Any]:
    """One curvature-report row; non-spacelike points are flagged, not fatal."""
    row: dict[str, Any] = {f"x{i + 1}": float(c) for i, c in enumerate(point)}
    row["u"] = jet.value
    p = float(np.linalg.norm(jet.gradient))
    row["du_norm"] = p
    try:
        rep = geometry.curvature_report(jet, point, grad_threshold)
    except NonSpacelike:
        row["cos_theta"] = 1.0 / math.sqrt(1.0 + p * p)
        row["H_R"] = geometry.mean_curvature_euclidean(jet)
        row["flags"] = "nonspacelike"
        return row
    row.update(cos_theta=rep.angles.cos_theta, cosh_psi=rep.angles.cosh_psi,
               A=rep.angles.ratio_A, H_R=rep.H_R, H_L=rep.H_L,
               residual=rep.residual, H_level=rep.H_level)
    row["flags"] = "degenerate_gradient" if rep.H_level is None else ""
    return row
