import re

import pytest

# (label, passed, detail) appended by the acceptance tests
ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def verdict():
    def record(label: str, ok: bool, detail: str = "") -> bool:
        ACCEPTANCE.append((label, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'} {label}: {detail}")
        return ok
    return record


def _order(row):
    m = re.search(r"\d+", row[0])
    return (int(m.group()) if m else 0, row[0])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in sorted(ACCEPTANCE, key=_order):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {label}: {detail}")
