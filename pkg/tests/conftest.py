import pytest

_OUTCOMES: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion id")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    for name, args in getattr(report, "criterion_marks", []):
        number, title = args
        prev = _OUTCOMES.get(number, ("PASS", title))[0]
        status = "PASS" if report.passed and prev == "PASS" else "FAIL"
        _OUTCOMES[number] = (status, title)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    report.criterion_marks = [("criterion", m.args) for m in item.iter_markers("criterion")]


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        status, title = _OUTCOMES[number]
        terminalreporter.write_line(f"{status} criterion {number:2d}: {title}")
