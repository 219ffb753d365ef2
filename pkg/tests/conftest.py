import os

import pytest

os.environ.setdefault("MPLBACKEND", "Agg")

CRITERIA = {
    1: "convexity of the Riemannian cone",
    2: "signature stability radius",
    3: "curvature golden values",
    4: "adjoint identity",
    5: "conformal variation",
    6: "slice decomposition",
    7: "Gauss-Bonnet",
    8: "Betti numbers and de Rham index",
    9: "spectral cutoff",
    10: "Callias index",
    11: "quasi-isometry",
    12: "Sobolev norms",
    13: "John ellipsoid",
    14: "determinism",
}

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    if rep.when == "call" or rep.failed:
        ok = rep.passed if rep.when == "call" else False
        _outcomes[n] = _outcomes.get(n, True) and ok


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        if n not in _outcomes:
            continue
        status = "PASS" if _outcomes[n] else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {CRITERIA[n]}")
