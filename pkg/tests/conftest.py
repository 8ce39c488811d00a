import re

_CRITERION = re.compile(r"test_criterion_(\d+)_")
_results: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    k = int(m.group(1))
    detail = "; ".join(f"{key}={value}" for key, value in report.user_properties)
    if report.when == "call" or report.failed:
        status = "PASS" if report.passed else "FAIL"
        if k not in _results or status == "FAIL":
            _results[k] = (status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_results):
        status, detail = _results[k]
        terminalreporter.write_line(f"criterion {k:2d}: {status}  {detail}".rstrip())
