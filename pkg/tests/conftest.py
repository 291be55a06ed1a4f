import pytest

from lwrdnl import FundamentalDiagram

# criterion number -> (title, list of (passed, detail))
_CRITERIA: dict[int, tuple[str, list]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.fixture
def tri():
    """Triangular diagram with v_f = 1, w = 0.5, jam density 3 (critical 1, capacity 1)."""
    return FundamentalDiagram.triangular(1.0, 0.5, 3.0)


@pytest.fixture
def measured(request):
    """Attach a one-line measurement to the acceptance summary."""
    def note(text: str):
        request.node.user_properties.append(("measured", text))
    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "setup" and rep.passed:
        return
    number, title = marker.args
    details = [v for k, v in item.user_properties if k == "measured"]
    _CRITERIA.setdefault(number, (title, []))[1].append((rep.passed, "; ".join(details)))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, results = _CRITERIA[number]
        ok = all(p for p, _ in results)
        detail = "; ".join(d for _, d in results if d)
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
