import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from spacelike.cli import convergence_table, main, parse_grid, parse_points
from spacelike.grid import read_field

HEL_GRID = "--grid=1.5:-1,4:1,17:9"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


# -- argument helpers ---------------------------------------------------------------

def test_parse_grid_and_points(tmp_path):
    g = parse_grid("1.5:-1,4:1,33:17")
    assert g.shape == (33, 17)
    np.testing.assert_array_equal(g.lo, [1.5, -1.0])
    pts = parse_points("2,0;1.5, 0.5", 2)
    np.testing.assert_array_equal(pts, [[2, 0], [1.5, 0.5]])
    f = tmp_path / "pts.txt"
    f.write_text("# x1 x2\n2 0\n3,1\n")
    np.testing.assert_array_equal(parse_points(str(f), 2), [[2, 0], [3, 1]])


def test_convergence_table_orders():
    t, orders = convergence_table([1e-2, 2.5e-3, 6.25e-4], [0.1, 0.05, 0.025], 1e-9)
    assert orders == pytest.approx([2.0, 2.0])
    t, orders = convergence_table([1e-15, 2e-15], [0.1, 0.05], 1e-9)
    assert orders == [] and t.rows[1]["order"] == "exact"


# -- eval ---------------------------------------------------------------------------

def test_eval_helicoid_point(capsys):
    code, out, _ = run(capsys, "eval", "--surface", "helicoid", "--points", "2,0")
    assert code == 0
    (row,) = rows(out)
    assert list(row) == ["x1", "x2", "u", "du_norm", "cos_theta", "cosh_psi", "A",
                         "H_R", "H_L", "residual", "H_level", "flags"]
    assert float(row["H_R"]) == 0.0 and float(row["H_L"]) == 0.0
    assert float(row["A"]) == pytest.approx(0.7745967, abs=1e-7)


def test_eval_hyperplane_and_nonspacelike(capsys):
    code, out, _ = run(capsys, "eval", "--surface", "hyperplane", "--param", "a=0.3,0.2",
                       "--points", "0,0;1,2")
    assert code == 0
    for row in rows(out):
        assert all(float(row[c]) == 0.0 for c in ("H_R", "H_L", "residual", "H_level"))
    code, out, _ = run(capsys, "eval", "--expr", "2*x1 + x2", "--arity", "2",
                       "--points", "0,0")
    assert code == 0
    assert rows(out)[0]["flags"] == "nonspacelike"


def test_eval_fd_grid_and_field(capsys, tmp_path):
    code, out, _ = run(capsys, "eval", "--surface", "helicoid", HEL_GRID, "--fd")
    assert code == 0
    assert len(rows(out)) == 15 * 7
    path = tmp_path / "sol.txt"
    code, _, _ = run(capsys, "solve", "--surface", "helicoid", HEL_GRID,
                     "--out", str(path))
    assert code == 0
    code, out, _ = run(capsys, "eval", "--field", str(path))
    assert code == 0 and len(rows(out)) == 15 * 7


@pytest.mark.parametrize("argv", [
    ["eval", "--surface", "helicoid"],                               # no points
    ["eval", "--surface", "helicoid", "--points", "1,2,3"],          # wrong dimension
    ["eval", "--surface", "nosuch", "--points", "1,2"],              # argparse choice
    ["eval", "--expr", "log(", "--arity", "1", "--points", "1"],    # parse error
    ["eval", "--expr", "log(x1)", "--arity", "1", "--points", "-1"],  # domain error
    ["eval", "--surface", "helicoid", "--param", "a", "--points", "2,0"],
    ["eval", "--field", "/nonexistent/field.txt"],
])
def test_eval_malformed(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err


# -- identities -----------------------------------------------------------------------

def test_identities_helicoid_all_pass(capsys):
    code, out, err = run(capsys, "identities", "--surface", "helicoid", "--samples", "200")
    assert code == 0
    table = rows(out)
    assert len(table) == 200 * 6
    assert all(r["applicable"] == "true" and r["passed"] == "true" for r in table)
    assert "1200/1200" in err


@pytest.mark.parametrize("surface", ["paraboloid", "lorentz_catenoid"])
def test_identities_gating(capsys, surface):
    code, out, _ = run(capsys, "identities", "--surface", surface, "--samples", "200")
    assert code == 0
    for r in rows(out):
        name = r["identity"].split("[")[0]
        if name in ("ratio_level", "ratio_gradient", "lifting"):
            assert r["passed"] == "true"
        else:
            assert r["applicable"] == "false" and r["passed"] == ""


def test_identities_failing_and_malformed(capsys):
    # a tolerance below rounding level makes the algebraic relations fail
    code, _, _ = run(capsys, "identities", "--surface", "paraboloid", "--samples", "50",
                     "--identity-tol", "1e-17")
    assert code == 1
    code, _, _ = run(capsys, "identities", "--surface", "helicoid", "--identity-tol", "-1")
    assert code == 2


# -- theorem --------------------------------------------------------------------------

def test_theorem_helicoid(capsys):
    code, out, err = run(capsys, "theorem", "--surface", "helicoid", "--samples", "200")
    assert code == 0
    table = rows(out)
    assert len(table) == 200
    assert all(r["category"] == "eligible" and r["passed"] == "true" for r in table)
    assert max(abs(float(r["H_level"])) for r in table) <= 1e-10


def test_theorem_catenoid_no_eligible(capsys):
    code, out, err = run(capsys, "theorem", "--surface", "lorentz_catenoid", "--samples", "50")
    assert code == 0
    assert "NoEligiblePoints" in err
    for r in rows(out):
        assert r["category"] == "control"
        r_ = np.hypot(float(r["x1"]), float(r["x2"]))
        assert float(r["H_level"]) == pytest.approx(1 / r_, rel=1e-12)


def test_theorem_fd_field(capsys, tmp_path):
    path = tmp_path / "sol.txt"
    assert run(capsys, "solve", "--surface", "helicoid", "--grid=1.5:-1,4:1,33:17",
               "--out", str(path))[0] == 0
    code, out, _ = run(capsys, "theorem", "--field", str(path))
    assert code == 0
    assert any(r["category"] == "eligible" for r in rows(out))


def test_theorem_failing_and_malformed(capsys):
    # a loosened flatness tolerance admits the catenoid, whose level sets are circles
    code, _, err = run(capsys, "theorem", "--surface", "lorentz_catenoid", "--samples", "20",
                       "--flat-tol", "10")
    assert code == 1
    code, _, _ = run(capsys, "theorem", "--surface", "hyperplane", "--param", "a=0.5",
                     "--n", "1", "--samples", "5")
    assert code == 2


# -- solve ----------------------------------------------------------------------------

def test_solve_helicoid_writes_field_and_history(capsys, tmp_path):
    out = tmp_path / "sol.txt"
    code, _, err = run(capsys, "solve", "--surface", "helicoid", "--kind", "maximal",
                       "--grid=1.5:-1,4:1,33:17", "--out", str(out))
    assert code == 0
    field, meta = read_field(out)
    assert meta["converged"] is True
    assert meta["iterations"] <= 8
    assert float(meta["residual_norm"]) <= 1e-10
    hist = rows((tmp_path / "sol.txt.history.csv").read_text())
    assert [int(r["iteration"]) for r in hist] == list(range(len(hist)))


@pytest.mark.parametrize("kind", ["minimal", "maximal", "equal"])
def test_solve_affine(capsys, tmp_path, kind):
    out = tmp_path / "aff.txt"
    code, _, _ = run(capsys, "solve", "--surface", "hyperplane", "--param", "a=0.3,-0.4",
                     "--kind", kind, "--grid=0:0,1:1,9:9", "--out", str(out))
    assert code == 0
    _, meta = read_field(out)
    assert meta["iterations"] <= 1


def test_solve_degenerate_exit_1(capsys, tmp_path):
    out = tmp_path / "deg.txt"
    code, _, err = run(capsys, "solve", "--surface", "paraboloid", "--param", "c=0.3",
                       "--kind", "equal", "--grid=-0.5:-0.5,0.5:0.5,17:17", "--out", str(out))
    assert code == 1
    assert "SingularJacobian" in err or "NotConverged" in err
    _, meta = read_field(out)
    assert meta["converged"] is False


@pytest.mark.parametrize("argv", [
    ["solve", "--surface", "helicoid"],                                    # no grid
    ["solve", "--surface", "helicoid", "--grid=-2:-2,2:2,9:9"],           # region violation
    ["solve", "--surface", "helicoid", HEL_GRID, "--kind", "cmc"],
    ["solve", "--surface", "helicoid", HEL_GRID, "--residual-tol", "0"],
    ["solve", "--surface", "helicoid", "--grid=1,2"],
])
def test_solve_malformed(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_solve_initial_guess(capsys, tmp_path):
    first = tmp_path / "a.txt"
    assert run(capsys, "solve", "--surface", "helicoid", HEL_GRID, "--out", str(first))[0] == 0
    second = tmp_path / "b.txt"
    assert run(capsys, "solve", "--surface", "helicoid", HEL_GRID, "--initial", str(first),
               "--out", str(second))[0] == 0
    assert read_field(second)[1]["iterations"] == 0
    assert run(capsys, "solve", "--surface", "helicoid", "--grid=1.5:-1,4:1,9:9",
               "--initial", str(first))[0] == 2


# -- sweep ----------------------------------------------------------------------------

def test_sweep_fd_jets(capsys):
    code, out, _ = run(capsys, "sweep", "--surface", "helicoid", HEL_GRID)
    assert code == 0
    orders = [float(r["order"]) for r in rows(out)[1:]]
    assert all(1.6 <= o <= 2.4 for o in orders)


def test_sweep_solve(capsys):
    code, out, _ = run(capsys, "sweep", "--surface", "helicoid", "--check", "solve",
                       "--kind", "maximal", HEL_GRID)
    assert code == 0
    assert all(float(r["order"]) >= 1.6 for r in rows(out)[1:])


def test_sweep_affine_exact(capsys):
    code, out, _ = run(capsys, "sweep", "--surface", "hyperplane", "--param", "a=0.3,0.1",
                       "--check", "solve", "--grid=0:0,1:1,5:5")
    assert code == 0
    assert [r["order"] for r in rows(out)] == ["", "exact", "exact"]


def test_sweep_failing_and_malformed(capsys):
    assert run(capsys, "sweep", "--surface", "helicoid", HEL_GRID, "--min-order", "2.5")[0] == 1
    assert run(capsys, "sweep", "--surface", "helicoid", HEL_GRID, "--levels", "1")[0] == 2


# -- catalog --------------------------------------------------------------------------

def test_catalog(capsys):
    code, out, _ = run(capsys, "catalog")
    assert code == 0
    names = [r["name"] for r in rows(out)]
    assert names == ["hyperplane", "helicoid", "lorentz_catenoid", "scherk", "paraboloid"]
    assert run(capsys, "catalog", "--format", "xml")[0] == 2


# -- determinism, json, entry point ------------------------------------------------

def test_csv_is_byte_identical_for_fixed_seed(capsys, tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"run{k}.csv"
        assert run(capsys, "eval", "--surface", "scherk", "--samples", "40",
                   "--seed", "17", "--out", str(path))[0] == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    path = tmp_path / "other.csv"
    run(capsys, "eval", "--surface", "scherk", "--samples", "40", "--seed", "18",
        "--out", str(path))
    assert path.read_bytes() != outs[0]


def test_json_output_metadata(capsys):
    code, out, _ = run(capsys, "eval", "--surface", "helicoid", "--points", "2,0",
                       "--format", "json", "--seed", "5")
    assert code == 0
    doc = json.loads(out)
    meta = doc["metadata"]
    assert meta["command"] == "eval" and meta["seed"] == 5
    assert "PCG64" in meta["prng"]
    assert {"spacelike", "numpy", "python"} <= set(meta["versions"])
    assert doc["rows"][0]["H_R"] == 0.0 and doc["rows"][0]["flags"] == ""


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "spacelike.cli", "catalog"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("name,")
    proc = subprocess.run([sys.executable, "-m", "spacelike.cli", "frobnicate"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
