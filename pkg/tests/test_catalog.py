import json
import math

import numpy as np
import pytest

from spacelike.catalog import (BUILTINS, boundary_trace, check_flags, custom_surface,
                               get_surface, load_custom, sample_points)
from spacelike.errors import CatalogError, RegionViolation
from spacelike.geometry import (level_mean_curvature, mean_curvature_euclidean,
                                mean_curvature_lorentzian)
from spacelike.grid import NodeLabel, StructuredGrid, fd_jets


FAMILIES = [
    ("hyperplane", {"a": [0.3]}, 1),
    ("hyperplane", {"a1": 0.2, "a2": -0.5, "b": 1.0}, 2),
    ("hyperplane", {"a": [0.1, 0.2, 0.3]}, 3),
    ("helicoid", {"a": 1.0}, 2),
    ("helicoid", {"a": -0.7}, 2),
    ("lorentz_catenoid", {"a": 1.0}, 2),
    ("lorentz_catenoid", {"a": 2.0}, 3),
    ("scherk", {}, 2),
    ("paraboloid", {"c": 0.5}, 2),
    ("paraboloid", {"c": -0.25}, 3),
]


@pytest.mark.parametrize("name, params, n", FAMILIES)
def test_flag_honesty(name, params, n):
    fam = get_surface(name, params, n)
    verdict = check_flags(fam, count=100, tol=1e-10)
    assert set(verdict) == {"euclidean_minimal", "lorentzian_maximal"}
    assert all(verdict.values()), verdict


def test_builtins_listed():
    assert set(BUILTINS) == {"hyperplane", "helicoid", "lorentz_catenoid", "scherk", "paraboloid"}


def test_hyperplane_flags_and_validation():
    fam = get_surface("hyperplane", {"a": 0.3}, 1)
    assert fam.flags == {"euclidean_minimal": "yes", "lorentzian_maximal": "yes"}
    with pytest.raises(CatalogError):
        get_surface("hyperplane", {"a": [0.8, 0.8]}, 2)
    with pytest.raises(CatalogError):
        get_surface("hyperplane", {"a": [0.1, 0.1]}, 3)
    with pytest.raises(CatalogError):
        get_surface("hyperplane", {"z": 1.0}, 2)


def test_helicoid_examples():
    fam = get_surface("helicoid", {"a": 1})
    jet = fam.jet((2.0, 0.0))
    assert mean_curvature_euclidean(jet) == 0.0
    assert mean_curvature_lorentzian(jet) == 0.0
    with pytest.raises(CatalogError):
        get_surface("helicoid", {"a": 0})
    with pytest.raises(CatalogError):
        get_surface("helicoid", {"a": 1}, n=3)


@pytest.mark.parametrize("a", [1.0, -2.5, 0.3])
@pytest.mark.parametrize("eps", [1e-6, 1e-3, 0.1, 1.0])
def test_helicoid_spatiality_boundary(a, eps):
    fam = get_surface("helicoid", {"a": a})
    for ang in (0.3, 1.7, -2.9):
        r = abs(a) * (1 + eps)
        jet = fam.jet((r * math.cos(ang), r * math.sin(ang)))
        assert np.linalg.norm(jet.gradient) == pytest.approx(1 / (1 + eps), abs=1e-13)


def test_catenoid_example():
    fam = get_surface("lorentz_catenoid", {"a": 1})
    jet = fam.jet((2.0, 0.0))
    assert abs(mean_curvature_lorentzian(jet)) < 1e-15
    assert abs(mean_curvature_euclidean(jet)) > 1e-2
    assert level_mean_curvature(jet) == pytest.approx(0.5, rel=1e-14)
    assert get_surface("lorentz_catenoid", {"a": 1}, 3).flags["lorentzian_maximal"] == "no"


def test_unknown_surface_and_parameters():
    with pytest.raises(CatalogError, match="unknown surface"):
        get_surface("enneper")
    with pytest.raises(CatalogError):
        get_surface("helicoid", {"b": 1})
    with pytest.raises(CatalogError):
        get_surface("paraboloid", {"c": "wide"})


def test_sample_points_deterministic_and_valid():
    fam = get_surface("scherk")
    a = sample_points(fam, 50, np.random.default_rng(3), grad_threshold=0.05)
    b = sample_points(fam, 50, np.random.default_rng(3), grad_threshold=0.05)
    assert np.array_equal(a, b)
    for p in a:
        g = fam.jet(p).gradient
        assert 0.05 <= np.linalg.norm(g) < 1
        assert fam.in_region(p[None, :])[0]


def test_sample_points_impossible():
    fam = get_surface("hyperplane", {"a": [0.1, 0.0]})
    with pytest.raises(CatalogError):
        sample_points(fam, 5, np.random.default_rng(0), grad_threshold=0.5, max_rounds=3)


def test_boundary_trace_hyperplane_is_affine():
    fam = get_surface("hyperplane", {"a": [0.3, -0.4], "b": 2.0})
    g = StructuredGrid((-1, -2), (3, 1), (9, 7))
    f = boundary_trace(fam, g)
    pts = g.coordinates()
    np.testing.assert_allclose(f.values, 0.3 * pts[:, 0] - 0.4 * pts[:, 1] + 2.0, atol=1e-12)


def test_boundary_trace_helicoid():
    fam = get_surface("helicoid", {"a": 1})
    g = StructuredGrid((1.5, -1.0), (4.0, 1.0), (33, 17))
    f = boundary_trace(fam, g)
    b = f.mask.labels == NodeLabel.BOUNDARY
    pts = g.coordinates()
    np.testing.assert_array_equal(f.values[b], np.arctan2(pts[b, 1], pts[b, 0]))
    r = np.hypot(pts[b, 0], pts[b, 1])
    assert np.all(1 / r <= 1 / 1.5)
    _, _, grads, _ = fd_jets(f)
    assert np.linalg.norm(grads, axis=1).max() < 1


@pytest.mark.parametrize("lo, hi", [
    ((-2.0, -2.0), (2.0, 2.0)),      # contains the origin
    ((-4.0, 0.5), (4.0, 3.0)),       # reaches the disk r <= 1
    ((-4.0, -3.0), (-1.5, 3.0)),     # crosses the branch cut
])
def test_boundary_trace_region_violation(lo, hi):
    fam = get_surface("helicoid", {"a": 1})
    with pytest.raises(RegionViolation):
        boundary_trace(fam, StructuredGrid(lo, hi, (9, 9)))


def test_boundary_trace_names_node():
    fam = get_surface("paraboloid", {"c": 0.5})
    with pytest.raises(RegionViolation, match=r"boundary node \(0, 0\)"):
        boundary_trace(fam, StructuredGrid((-0.9, -0.9), (0.9, 0.9), (7, 7)))


def test_custom_surface_roundtrip(tmp_path):
    doc = {"name": "saddle", "n": 2, "expression": "k*(x1^2 - x2^2)",
           "parameters": {"k": 0.2},
           "flags": {"euclidean_minimal": "unknown", "lorentzian_maximal": "no"},
           "box": {"lo": [-1, -1], "hi": [1, 1]}}
    path = tmp_path / "saddle.json"
    path.write_text(json.dumps(doc))
    for src in (path, str(path), json.dumps(doc), doc):
        fam = load_custom(src)
        assert fam.name == "saddle" and fam.n == 2
        assert fam.jet((0.5, 0.0)).gradient[0] == pytest.approx(0.2)
        assert fam.flags["lorentzian_maximal"] == "no"
    assert check_flags(load_custom(doc)) == {"lorentzian_maximal": True}


def test_custom_defaults_unknown_flags():
    fam = custom_surface("0.1*x1*x2", 2)
    assert set(fam.flags.values()) == {"unknown"}
    assert check_flags(fam) == {}


@pytest.mark.parametrize("doc", [
    "{not json",
    {"n": 2},
    {"n": 2, "expression": "x3"},
    {"n": 2, "expression": "x1", "flags": {"euclidean_minimal": "maybe"}},
])
def test_custom_errors(doc):
    with pytest.raises(CatalogError):
        load_custom(doc)
