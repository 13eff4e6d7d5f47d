import re

import pytest

_RESULTS: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = re.match(r"test_criterion_(\d+)_(\w+)", item.name)
    if m and (rep.when == "call" or rep.outcome != "passed"):
        n = int(m.group(1))
        if rep.when == "call" or n not in _RESULTS:
            _RESULTS[n] = ("PASS" if rep.passed else "FAIL", m.group(2).replace("_", " "))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        status, label = _RESULTS[n]
        terminalreporter.write_line(f"criterion {n:>2}: {status}  {label}")
