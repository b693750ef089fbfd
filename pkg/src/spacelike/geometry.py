"""Pointwise curvature of graphs x_{n+1} = u(x) in R^{n+1} and L^{n+1}.

Everything here is a closed-form function of a second-order jet
(u, Du, D^2u).  Conventions:

* graph normals point upward: N_R = (-Du, 1)/sqrt(1+|Du|^2),
  N_L = (Du, 1)/sqrt(1-|Du|^2);
* the Lorentzian metric has signature (+, ..., +, -);
* a level hypersurface {u = c} of R^n carries the normal Du/|Du|;
* normal curvature is II(v, v)/I(v, v) with respect to those normals.

With these choices  sum_i kappa^R = n H_R  and  sum_i kappa^L = -n H_L  over
any frame of lifted directions orthogonal for the induced metric.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGradient, NonSpacelike, NotTangent, ZeroDirection
from .expr import Jet2

DEFAULT_GRAD_THRESHOLD = 1e-6

__all__ = [
    "Spatiality", "AngleData", "CurvatureReport", "TangentFrame",
    "IdentityCheck", "IdentityReport", "classify_spatiality", "angle_data",
    "normals", "lorentz_inner", "mean_curvature_euclidean",
    "mean_curvature_lorentzian", "hrhl_residual", "level_mean_curvature",
    "tangent_frame", "normal_curvature_euclidean",
    "normal_curvature_lorentzian", "level_normal_curvature",
    "check_proof_identities", "curvature_report",
]


class Spatiality(enum.Enum):
    SPACELIKE = "spacelike"
    MARGINAL = "marginal"
    NON_SPACELIKE = "nonspacelike"


@dataclass(frozen=True)
class AngleData:
    du_norm: float
    cos_theta: float
    cosh_psi: float
    ratio_A: float


@dataclass(frozen=True, eq=False)
class TangentFrame:
    grad_dir: np.ndarray
    level_basis: tuple[np.ndarray, ...]


@dataclass(frozen=True, eq=False)
class CurvatureReport:
    point: np.ndarray
    jet: Jet2
    angles: AngleData
    normal_R: np.ndarray
    normal_L: np.ndarray
    H_R: float
    H_L: float
    residual: float
    H_level: float | None


# -- invariants of the jet --------------------------------------------------

def _parts(jet: Jet2):
    g = jet.gradient
    h = jet.hessian
    p2 = float(g @ g)
    lap = float(np.trace(h))
    q = float(g @ h @ g)
    return g, h, p2, lap, q


def _require_spacelike(jet: Jet2) -> float:
    p2 = float(jet.gradient @ jet.gradient)
    if not p2 < 1.0:
        raise NonSpacelike(f"|Du| = {math.sqrt(p2):.17g} >= 1")
    return p2


def classify_spatiality(jet: Jet2, margin: float = 0.0) -> Spatiality:
    if not 0.0 <= margin < 1.0:
        raise ValueError("margin must lie in [0, 1)")
    p = float(np.linalg.norm(jet.gradient))
    if p >= 1.0:
        return Spatiality.NON_SPACELIKE
    if p > 1.0 - margin:
        return Spatiality.MARGINAL
    return Spatiality.SPACELIKE


def angle_data(jet: Jet2) -> AngleData:
    p2 = _require_spacelike(jet)
    cos_theta = 1.0 / math.sqrt(1.0 + p2)
    cosh_psi = 1.0 / math.sqrt(1.0 - p2)
    return AngleData(math.sqrt(p2), cos_theta, cosh_psi,
                     math.sqrt((1.0 - p2) / (1.0 + p2)))


def lorentz_inner(a, b) -> float:
    """<a, b>_L with signature (+, ..., +, -)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(a[:-1] @ b[:-1] - a[-1] * b[-1])


def normals(jet: Jet2) -> tuple[np.ndarray, np.ndarray]:
    p2 = _require_spacelike(jet)
    g = jet.gradient
    n_r = np.append(-g, 1.0) / math.sqrt(1.0 + p2)
    n_l = np.append(g, 1.0) / math.sqrt(1.0 - p2)
    return n_r, n_l


# -- mean curvatures ----------------------------------------------------------

def mean_curvature_euclidean(jet: Jet2) -> float:
    """H_R = (1/n) div(Du / sqrt(1 + |Du|^2)), expanded."""
    _, _, p2, lap, q = _parts(jet)
    w = 1.0 + p2
    return (lap * w - q) / (w * math.sqrt(w)) / jet.n


def mean_curvature_lorentzian(jet: Jet2) -> float:
    """H_L = (1/n) div(Du / sqrt(1 - |Du|^2)), expanded."""
    _require_spacelike(jet)
    _, _, p2, lap, q = _parts(jet)
    w = 1.0 - p2
    return (lap * w + q) / (w * math.sqrt(w)) / jet.n


def equal_curvature_coefficient(s: float) -> float:
    """1/sqrt(1-s) - 1/sqrt(1+s) for s = |Du|^2, free of cancellation."""
    return 2.0 * s / (math.sqrt(1.0 - s * s)
                      * (math.sqrt(1.0 + s) + math.sqrt(1.0 - s)))


def hrhl_residual(jet: Jet2) -> float:
    """div((1/sqrt(1-|Du|^2) - 1/sqrt(1+|Du|^2)) Du), expanded by the
    product rule.  Equals n (H_L - H_R)."""
    p2 = _require_spacelike(jet)
    _, _, _, lap, q = _parts(jet)
    f = equal_curvature_coefficient(p2)
    # 2 f'(s) with f(s) = (1-s)^-1/2 - (1+s)^-1/2
    df2 = (1.0 - p2) ** -1.5 + (1.0 + p2) ** -1.5
    return f * lap + df2 * q


def level_mean_curvature(jet: Jet2, grad_threshold: float = DEFAULT_GRAD_THRESHOLD
                         ) -> float:
    """Mean curvature (1/(n-1)) div(Du/|Du|) of the level set through the point."""
    if jet.n < 2:
        raise ValueError("level hypersurfaces need n >= 2")
    _, _, p2, lap, q = _parts(jet)
    p = math.sqrt(p2)
    if not p >= grad_threshold or p == 0.0:
        raise DegenerateGradient(f"|Du| = {p:.3g} below threshold {grad_threshold:.3g}")
    return (lap * p2 - q) / (p2 * p) / (jet.n - 1)


# -- frames and normal curvatures --------------------------------------------

def tangent_frame(du, tol: float = DEFAULT_GRAD_THRESHOLD) -> TangentFrame:
    """Orthonormal completion of du/|du| by a Householder reflection.

    The pivot is the largest |component| (first on ties), which keeps the
    reflection well conditioned and the output deterministic.
    """
    du = np.asarray(du, dtype=float).reshape(-1)
    norm = float(np.linalg.norm(du))
    if not norm > tol:
        raise DegenerateGradient(f"|du| = {norm:.3g} not above {tol:.3g}")
    g = du / norm
    k = int(np.argmax(np.abs(g)))
    w = g.copy()
    w[k] += 1.0 if g[k] >= 0 else -1.0
    w /= np.linalg.norm(w)
    refl = np.eye(g.size) - 2.0 * np.outer(w, w)
    basis = tuple(refl[:, j].copy() for j in range(g.size) if j != k)
    return TangentFrame(g, basis)


def _direction(v, n):
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != n:
        raise ValueError(f"direction has length {v.size}, expected {n}")
    vv = float(v @ v)
    if vv == 0.0:
        raise ZeroDirection("zero direction")
    return v, vv


def normal_curvature_euclidean(jet: Jet2, v) -> float:
    """Normal curvature of the graph in R^{n+1} along the lift (v, Du.v)."""
    v, vv = _direction(v, jet.n)
    g = jet.gradient
    dv = float(g @ v)
    return float(v @ jet.hessian @ v) / (math.sqrt(1.0 + float(g @ g)) * (vv + dv * dv))


def normal_curvature_lorentzian(jet: Jet2, v) -> float:
    """Normal curvature of the graph in L^{n+1} along the lift (v, Du.v)."""
    v, vv = _direction(v, jet.n)
    p2 = _require_spacelike(jet)
    dv = float(jet.gradient @ v)
    return -float(v @ jet.hessian @ v) / (math.sqrt(1.0 - p2) * (vv - dv * dv))


def level_normal_curvature(jet: Jet2, v, tol: float = DEFAULT_GRAD_THRESHOLD) -> float:
    """Normal curvature of the level hypersurface in R^n along tangent v."""
    v, vv = _direction(v, jet.n)
    p = float(np.linalg.norm(jet.gradient))
    if not p > tol:
        raise DegenerateGradient(f"|Du| = {p:.3g} not above {tol:.3g}")
    if abs(float(v @ jet.gradient)) > tol * math.sqrt(vv) * p:
        raise NotTangent("direction is not tangent to the level set")
    return -float(v @ jet.hessian @ v) / (p * vv)


# -- identity checks -----------------------------------------------------------

@dataclass(frozen=True)
class IdentityCheck:
    name: str
    lhs: float
    rhs: float
    applicable: bool
    passed: bool | None

    @property
    def error(self) -> float:
        return abs(self.lhs - self.rhs)


@dataclass(frozen=True)
class IdentityReport:
    checks: tuple[IdentityCheck, ...] = field(default_factory=tuple)

    def __iter__(self):
        return iter(self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def by_prefix(self, prefix):
        return [c for c in self.checks if c.name.split("[")[0] == prefix]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks if c.applicable)


def _close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def check_proof_identities(jet: Jet2, tol: float = 1e-10,
                           grad_threshold: float = DEFAULT_GRAD_THRESHOLD
                           ) -> IdentityReport:
    """Evaluate the chain of pointwise relations behind the level-set theorem.

    Checks, in the frame from :func:`tangent_frame`:

    ``ratio_level[i]``    kR(e_i) = -A kL(e_i)
    ``ratio_gradient``    kR(grad) = -A^3 kL(grad)
    ``lifting[i]``        kL(e_i) sqrt(1-|Du|^2) = |Du| kc(e_i)
    ``balance``           -kL(grad) = sum kL(e_i) / (A^2+A+1), only where the
                          H_R = H_L residual is below tol
    ``vanish_gradient``   -kL(grad) = 0, only where H_L and the residual are
                          both below tol
    ``vanish_level``      sum kL(e_i) = 0, under the same condition

    Comparisons use ``|lhs - rhs| <= tol * max(1, |lhs|, |rhs|)``.
    """
    p2 = _require_spacelike(jet)
    p = math.sqrt(p2)
    if not p > grad_threshold:
        raise DegenerateGradient(f"|Du| = {p:.3g} not above {grad_threshold:.3g}")
    frame = tangent_frame(jet.gradient, grad_threshold)
    A = angle_data(jet).ratio_A
    checks = []

    kl_level = []
    for i, e in enumerate(frame.level_basis):
        kr = normal_curvature_euclidean(jet, e)
        kl = normal_curvature_lorentzian(jet, e)
        kc = level_normal_curvature(jet, e, tol=max(grad_threshold, 1e-12))
        kl_level.append(kl)
        rhs = -A * kl
        checks.append(IdentityCheck(f"ratio_level[{i}]", kr, rhs, True, _close(kr, rhs, tol)))
        lhs = kl * math.sqrt(1.0 - p2)
        rhs = p * kc
        checks.append(IdentityCheck(f"lifting[{i}]", lhs, rhs, True, _close(lhs, rhs, tol)))

    kr_g = normal_curvature_euclidean(jet, frame.grad_dir)
    kl_g = normal_curvature_lorentzian(jet, frame.grad_dir)
    rhs = -A ** 3 * kl_g
    checks.append(IdentityCheck("ratio_gradient", kr_g, rhs, True, _close(kr_g, rhs, tol)))

    sum_level = math.fsum(kl_level)
    residual_small = abs(hrhl_residual(jet)) < tol
    lhs = -kl_g
    rhs = sum_level / (A * A + A + 1.0)
    checks.append(IdentityCheck("balance", lhs, rhs, residual_small,
                                _close(lhs, rhs, tol) if residual_small else None))

    maximal = residual_small and abs(mean_curvature_lorentzian(jet)) < tol
    checks.append(IdentityCheck("vanish_gradient", -kl_g, 0.0, maximal,
                                abs(kl_g) <= tol if maximal else None))
    checks.append(IdentityCheck("vanish_level", sum_level, 0.0, maximal,
                                abs(sum_level) <= tol if maximal else None))
    return IdentityReport(tuple(checks))


def curvature_report(jet: Jet2, point=None,
                     grad_threshold: float = DEFAULT_GRAD_THRESHOLD) -> CurvatureReport:
    """Bundle every pointwise quantity for a spacelike jet."""
    angles = angle_data(jet)
    n_r, n_l = normals(jet)
    h_level = None
    if jet.n >= 2 and angles.du_norm >= grad_threshold and angles.du_norm > 0:
        h_level = level_mean_curvature(jet, grad_threshold)
    pt = np.zeros(jet.n) if point is None else np.asarray(point, dtype=float)
    return CurvatureReport(
        point=pt, jet=jet, angles=angles, normal_R=n_r, normal_L=n_l,
        H_R=mean_curvature_euclidean(jet), H_L=mean_curvature_lorentzian(jet),
        residual=hrhl_residual(jet), H_level=h_level)
