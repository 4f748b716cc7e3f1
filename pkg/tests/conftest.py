import functools

import numpy as np
import pytest

from lvsurgery import IntegratorConfig, State, SystemParams, integrate

SPHERE = SystemParams(3.0, 3.0, 3.0)
TORUS = SystemParams(2.9851, 3.0, 3.0)
SPHERE_ICS = [(1, 1.59, 0.81), (1, 1.3, 0.89), (1, 1.18, 0.95), (1, 1.08, 0.98)]
TORUS_ICS = [(1.1075, 1, 1), (1, 1, 0.95), (1, 1, 0.9)]
FRACTAL_IC = (1.45, 1, 1.45)


@functools.lru_cache(maxsize=None)
def run(params: SystemParams, ic: tuple, t_end: float = 500.0):
    """Integrate once per (params, ic, t_end) for the whole session."""
    return integrate(params, State(*ic), IntegratorConfig(t_end=t_end))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# ---------------------------------------------------------------- acceptance summary
# Tests marked ``criterion(n, title)`` get one PASS/FAIL line in the terminal
# summary; details attached through ``record_property("detail", ...)``.

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    n, title = mark.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    prev = _CRITERIA.get(n, (True, title, ""))
    _CRITERIA[n] = (prev[0] and rep.passed, title, detail or prev[2])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, title, detail = _CRITERIA[n]
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
