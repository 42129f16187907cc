"""Shared hooks: collect acceptance-criterion outcomes and print one line each."""

_CRITERIA = {}


def record_criterion(num, ok, text):
    _CRITERIA[num] = (bool(ok), text)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        ok, text = _CRITERIA[num]
        tag = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{tag}] criterion {num}: {text}")
