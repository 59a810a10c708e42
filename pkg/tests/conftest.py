import re

_ACCEPT_RE = re.compile(r"test_acceptance\.py::(test_c\d+[a-z_0-9]*)")
_outcomes = {}


def pytest_runtest_logreport(report):
    m = _ACCEPT_RE.search(report.nodeid)
    if not m:
        return
    name = m.group(1)
    if report.when == "call":
        _outcomes[name] = "PASS" if report.passed else "FAIL"
    elif report.when == "setup" and report.failed:
        _outcomes[name] = "ERROR"


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    try:
        from test_acceptance import CRITERIA, DETAILS
    except Exception:
        CRITERIA, DETAILS = {}, {}
    terminalreporter.write_sep("=", "acceptance criteria")
    for name in sorted(_outcomes):
        label = CRITERIA.get(name, name)
        detail = DETAILS.get(name, "")
        line = f"{_outcomes[name]:5s} {label}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
