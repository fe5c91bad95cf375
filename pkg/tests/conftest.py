import pytest

_LINES_KEY = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record and print one 'ACCEPTANCE n: PASS|FAIL|SKIP detail' line, then gate on it."""
    lines = request.config.stash.setdefault(_LINES_KEY, [])

    def record(number, ok, detail, gating=True):
        status = "PASS" if ok else ("FAIL" if gating else "INFO")
        line = f"ACCEPTANCE {number}: {status} {detail}"
        lines.append(line)
        print(line)
        if gating:
            assert ok, line

    def skip(number, reason):
        line = f"ACCEPTANCE {number}: SKIP {reason}"
        lines.append(line)
        print(line)
        pytest.skip(reason)

    record.skip = skip
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
