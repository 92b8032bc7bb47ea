import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    from multigrasp.kernels import get_backend
    return get_backend(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def data_dir():
    return DATA


# --- acceptance criteria summary --------------------------------------------
# Tests marked ``criterion("A<n>")`` are grouped; a criterion passes when every
# one of its tests passes. Tests may attach a one-line detail with
# ``record_property("detail", ...)``.

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion a test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    entry = _CRITERIA.setdefault(mark.args[0], {"ok": True, "details": []})
    if rep.failed or rep.skipped:
        entry["ok"] = False
        entry["details"].append(f"{item.name} {rep.outcome}")
    elif rep.when == "call":
        entry["details"].extend(v for k, v in item.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA):
        e = _CRITERIA[name]
        status = "PASS" if e["ok"] else "FAIL"
        terminalreporter.write_line(f"{name} {status}  {'; '.join(e['details'])}".rstrip())
