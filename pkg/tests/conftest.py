import numpy as np
import pytest

from spacelike.expr import Jet2


def random_spacelike_jet(rng, n, pmin=1e-3, pmax=0.9, hbound=1.0):
    """|Du| uniform in [pmin, pmax] along a random direction, Hessian entries
    uniform in [-hbound, hbound] (symmetrised)."""
    d = rng.normal(size=n)
    d /= np.linalg.norm(d)
    g = d * rng.uniform(pmin, pmax)
    a = rng.uniform(-hbound, hbound, size=(n, n))
    h = np.triu(a) + np.triu(a, 1).T
    return Jet2(rng.uniform(-1, 1), g, h)


def bi_flat_jet(rng, n, pmin=1e-3, pmax=0.9):
    """Random jet with Laplacian 0 and Du^T D^2u Du = 0, i.e. H_R = H_L = 0."""
    d = rng.normal(size=n)
    d /= np.linalg.norm(d)
    # orthonormal frame with first column d
    q, _ = np.linalg.qr(np.column_stack([d, rng.normal(size=(n, n - 1))]))
    q[:, 0] = d
    m = rng.uniform(-1, 1, size=(n, n))
    m = 0.5 * (m + m.T)
    m[0, 0] = 0.0
    m[1, 1] = -np.trace(m[2:, 2:]) if n > 2 else 0.0
    h = q @ m @ q.T
    return Jet2(0.0, d * rng.uniform(pmin, pmax), h)


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


# -- acceptance summary ----------------------------------------------------------------
# tests marked @pytest.mark.acceptance(number, title) get one PASS/FAIL line in
# the terminal summary, whatever the capture mode

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    number, title = mark.args
    prev = _ACCEPTANCE.get(number, (title, True))
    _ACCEPTANCE[number] = (title, prev[1] and not rep.failed)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok = _ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {number:2d}: {title}")
