import numpy as np
import pytest

_CRITERIA = {}


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(20240601))


@pytest.fixture
def detail(request):
    """Attach a one-line measurement summary to an acceptance test."""

    def record(text):
        request.node.user_properties.append(("detail", text))
        print(text)

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    number, title = mark.args
    text = "; ".join(v for k, v in item.user_properties if k == "detail")
    _CRITERIA[number] = (rep.passed, title, text)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, title, text = _CRITERIA[number]
        line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2}: {title}"
        terminalreporter.write_line(f"{line} ({text})" if text else line)
