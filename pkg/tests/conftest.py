import pytest

# criterion number -> (passed, detail); filled by the acceptance tests
CRITERIA: dict = {}


@pytest.fixture
def report():
    def record(number, passed, detail):
        CRITERIA[number] = (bool(passed), detail)
        print(f"CRITERION {number}: {'PASS' if passed else 'FAIL'} ({detail})")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        passed, detail = CRITERIA[number]
        terminalreporter.write_line(f"CRITERION {number}: {'PASS' if passed else 'FAIL'} ({detail})")
