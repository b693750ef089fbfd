"""Stencil kernels: finite-difference jets, pointwise PDE residuals and the
local Jacobian blocks used by the Newton solver.

Every Interior node owns a 3^n neighbourhood.  Its stencil values are
gathered into one row of an ``(N, 3^n)`` array ``S``; a node's residual
depends on that row only, so the Jacobian of the assembled residual is
fully described by the ``(N, 3^n)`` array of row-wise partial derivatives.

Each kernel exists twice: a vectorised numpy version and a numba loop
version.  ``backend=None`` picks numba unless ``SPACELIKE_DISABLE_NUMBA``
is set.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ._accel import HAVE_NUMBA, default_backend, njit

# PDE kinds, as integer codes for the compiled kernels
MINIMAL_EUCLIDEAN = 0
MAXIMAL_LORENTZIAN = 1
EQUAL_CURVATURE = 2


@dataclass(frozen=True, eq=False)
class StencilTables:
    """Index tables into the 3^n neighbourhood, in itertools.product order
    over offsets (-1, 0, 1) per axis, last axis fastest."""

    offsets: np.ndarray     # (K, n) integer offsets
    center: int
    plus: np.ndarray        # (n,)  +e_a
    minus: np.ndarray       # (n,)  -e_a
    pp: np.ndarray          # (n, n) +e_a +e_b
    pm: np.ndarray
    mp: np.ndarray
    mm: np.ndarray

    @property
    def size(self) -> int:
        return self.offsets.shape[0]


_TABLE_CACHE: dict[int, StencilTables] = {}


def stencil_tables(n: int) -> StencilTables:
    if n in _TABLE_CACHE:
        return _TABLE_CACHE[n]
    offs = np.array(list(itertools.product((-1, 0, 1), repeat=n)), dtype=np.int64)
    lookup = {tuple(o): k for k, o in enumerate(offs.tolist())}

    def at(*shift):
        o = [0] * n
        for axis, step in shift:
            o[axis] += step
        return lookup[tuple(o)]

    plus = np.array([at((a, 1)) for a in range(n)], dtype=np.int64)
    minus = np.array([at((a, -1)) for a in range(n)], dtype=np.int64)
    pp = np.zeros((n, n), dtype=np.int64)
    pm = np.zeros_like(pp)
    mp = np.zeros_like(pp)
    mm = np.zeros_like(pp)
    for a, b in itertools.permutations(range(n), 2):
        pp[a, b] = at((a, 1), (b, 1))
        pm[a, b] = at((a, 1), (b, -1))
        mp[a, b] = at((a, -1), (b, 1))
        mm[a, b] = at((a, -1), (b, -1))
    t = StencilTables(offs, lookup[(0,) * n], plus, minus, pp, pm, mp, mm)
    _TABLE_CACHE[n] = t
    return t


# ---------------------------------------------------------------------------
# numpy path


def jets_numpy(S, t: StencilTables, h):
    """Second-order central-difference gradients and Hessians, ``(N, n)``
    and ``(N, n, n)``."""
    S = np.asarray(S, dtype=float)
    h = np.asarray(h, dtype=float)
    n = h.size
    N = S.shape[0]
    grad = (S[:, t.plus] - S[:, t.minus]) / (2.0 * h)
    hess = np.empty((N, n, n))
    c = S[:, t.center]
    for a in range(n):
        hess[:, a, a] = (S[:, t.plus[a]] - 2.0 * c + S[:, t.minus[a]]) / (h[a] * h[a])
        for b in range(a + 1, n):
            cross = (S[:, t.pp[a, b]] - S[:, t.pm[a, b]] - S[:, t.mp[a, b]]
                     + S[:, t.mm[a, b]]) / (4.0 * h[a] * h[b])
            hess[:, a, b] = cross
            hess[:, b, a] = cross
    return grad, hess


def pointwise_residual_numpy(grad, hess, kind: int):
    """Divergence-form residual from jets: n H_R, n H_L or n (H_L - H_R)."""
    p2 = np.einsum("ia,ia->i", grad, grad)
    lap = np.einsum("iaa->i", hess)
    q = np.einsum("ia,iab,ib->i", grad, hess, grad)
    with np.errstate(invalid="ignore", divide="ignore"):
        if kind == MINIMAL_EUCLIDEAN:
            w = 1.0 + p2
            return (lap * w - q) / (w * np.sqrt(w))
        if kind == MAXIMAL_LORENTZIAN:
            w = 1.0 - p2
            out = (lap * w + q) / (w * np.sqrt(w))
        elif kind == EQUAL_CURVATURE:
            f = 2.0 * p2 / (np.sqrt(1.0 - p2 * p2)
                            * (np.sqrt(1.0 + p2) + np.sqrt(1.0 - p2)))
            wl = 1.0 - p2
            wr = 1.0 + p2
            out = f * lap + (1.0 / (wl * np.sqrt(wl)) + 1.0 / (wr * np.sqrt(wr))) * q
        else:
            raise ValueError(f"unknown PDE kind {kind}")
    out[p2 >= 1.0] = np.nan
    return out


def residual_numpy(S, t, h, kind):
    grad, hess = jets_numpy(S, t, h)
    return pointwise_residual_numpy(grad, hess, kind)


def local_jacobian_numpy(S, t, h, kind, rel_step):
    """Forward-difference partials d r_i / d S[i, k], shape ``(N, K)``."""
    S = np.array(S, dtype=float)
    r0 = residual_numpy(S, t, h, kind)
    out = np.empty_like(S)
    for k in range(S.shape[1]):
        col = S[:, k].copy()
        bumped = col + rel_step * (1.0 + np.abs(col))
        S[:, k] = bumped
        out[:, k] = (residual_numpy(S, t, h, kind) - r0) / (bumped - col)
        S[:, k] = col
    return out


# ---------------------------------------------------------------------------
# numba path


@njit(cache=True)
def _row_residual(row, center, plus, minus, pp, pm, mp, mm, h, kind, grad, hess):
    # grad (n,) and hess (n, n) are caller-owned scratch, reused across rows
    n = h.shape[0]
    c = row[center]
    for a in range(n):
        grad[a] = (row[plus[a]] - row[minus[a]]) / (2.0 * h[a])
        hess[a, a] = (row[plus[a]] - 2.0 * c + row[minus[a]]) / (h[a] * h[a])
        for b in range(a + 1, n):
            x = (row[pp[a, b]] - row[pm[a, b]] - row[mp[a, b]] + row[mm[a, b]]) \
                / (4.0 * h[a] * h[b])
            hess[a, b] = x
            hess[b, a] = x
    p2 = 0.0
    lap = 0.0
    q = 0.0
    for a in range(n):
        p2 += grad[a] * grad[a]
        lap += hess[a, a]
        for b in range(n):
            q += grad[a] * hess[a, b] * grad[b]
    if kind == 0:
        w = 1.0 + p2
        return (lap * w - q) / (w * np.sqrt(w))
    if p2 >= 1.0:
        return np.nan
    if kind == 1:
        w = 1.0 - p2
        return (lap * w + q) / (w * np.sqrt(w))
    f = 2.0 * p2 / (np.sqrt(1.0 - p2 * p2) * (np.sqrt(1.0 + p2) + np.sqrt(1.0 - p2)))
    wl = 1.0 - p2
    wr = 1.0 + p2
    return f * lap + (1.0 / (wl * np.sqrt(wl)) + 1.0 / (wr * np.sqrt(wr))) * q


@njit(cache=True)
def _residual_numba(S, center, plus, minus, pp, pm, mp, mm, h, kind):
    N = S.shape[0]
    n = h.shape[0]
    out = np.empty(N)
    grad = np.empty(n)
    hess = np.empty((n, n))
    for i in range(N):
        out[i] = _row_residual(S[i], center, plus, minus, pp, pm, mp, mm, h, kind,
                               grad, hess)
    return out


@njit(cache=True)
def _local_jacobian_numba(S, center, plus, minus, pp, pm, mp, mm, h, kind, rel_step):
    N, K = S.shape
    out = np.empty((N, K))
    row = np.empty(K)
    n = h.shape[0]
    grad = np.empty(n)
    hess = np.empty((n, n))
    for i in range(N):
        for k in range(K):
            row[k] = S[i, k]
        r0 = _row_residual(row, center, plus, minus, pp, pm, mp, mm, h, kind, grad, hess)
        for k in range(K):
            x = row[k]
            bumped = x + rel_step * (1.0 + abs(x))
            row[k] = bumped
            r = _row_residual(row, center, plus, minus, pp, pm, mp, mm, h, kind, grad, hess)
            out[i, k] = (r - r0) / (bumped - x)
            row[k] = x
    return out


def _tables_args(t: StencilTables):
    return t.center, t.plus, t.minus, t.pp, t.pm, t.mp, t.mm


# ---------------------------------------------------------------------------
# dispatch


def _backend(backend):
    backend = backend or default_backend()
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise ValueError("numba backend requested but numba is not installed")
    return backend


def stencil_residual(S, t: StencilTables, h, kind: int, backend: str | None = None):
    backend = _backend(backend)
    S = np.ascontiguousarray(S, dtype=float)
    h = np.ascontiguousarray(h, dtype=float)
    if backend == "numba":
        return _residual_numba(S, *_tables_args(t), h, int(kind))
    return residual_numpy(S, t, h, kind)


def stencil_jacobian(S, t: StencilTables, h, kind: int, rel_step: float,
                     backend: str | None = None):
    backend = _backend(backend)
    S = np.ascontiguousarray(S, dtype=float)
    h = np.ascontiguousarray(h, dtype=float)
    if backend == "numba":
        return _local_jacobian_numba(S, *_tables_args(t), h, int(kind), float(rel_step))
    return local_jacobian_numpy(S, t, h, kind, rel_step)
