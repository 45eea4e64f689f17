"""Collects per-criterion outcomes of the acceptance suite and prints a summary."""

import pytest

CRITERIA = {
    1: "uniform sampling rate slope -1/n",
    2: "adaptive exponential convergence (1-D trio)",
    3: "eta floor decreases with eta",
    4: "5-D adaptive convergence",
    5: "normalization independence",
    6: "translation equivariance",
    7: "sigma overestimates the error",
    8: "multi-root discovery",
    9: "estimator matches arbitrary-precision oracle",
    10: "determinism and worker merge",
}

_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (rep.when != "call" and rep.passed):
        return
    entry = _results.setdefault(marker.args[0], {"ok": True, "notes": []})
    if not rep.passed:
        entry["ok"] = False
    if rep.when == "call":
        entry["notes"] += [f"{k}={v}" for k, v in item.user_properties]


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        if n not in _results:
            continue
        r = _results[n]
        status = "PASS" if r["ok"] else "FAIL"
        notes = ("  " + " ".join(r["notes"])) if r["notes"] else ""
        terminalreporter.write_line(f"criterion {n:2d} {status}: {title}{notes}")
