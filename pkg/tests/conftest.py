import pytest

_RESULTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    n = mark.args[0]
    if rep.failed or (rep.when == "call" and n not in _RESULTS):
        detail = getattr(item, "acceptance_detail", "")
        if rep.failed:
            detail = str(rep.longrepr).strip().splitlines()[-1][:160]
        _RESULTS[n] = ("PASS" if rep.passed else "FAIL", item.name, detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        status, name, detail = _RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {name}  {detail}".rstrip())
