import pytest

_results = {}


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        crit = dict(report.user_properties).get("criterion")
        if crit is None:
            return
        key, text = crit
        prev = _results.get(key)
        ok = report.outcome == "passed"
        detail = dict(report.user_properties).get("detail", "")
        if prev is None:
            _results[key] = [text, ok, [detail] if detail else []]
        else:
            prev[1] = prev[1] and ok
            if detail:
                prev[2].append(detail)


@pytest.fixture(autouse=True)
def _criterion_tag(request):
    marker = request.node.get_closest_marker("criterion")
    if marker is not None:
        request.node.user_properties.append(("criterion", tuple(marker.args)))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_results):
        text, ok, details = _results[key]
        line = f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {text}"
        if details:
            line += "  [" + "; ".join(details) + "]"
        terminalreporter.write_line(line)
