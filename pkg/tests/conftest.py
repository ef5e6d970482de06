import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("lab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")

_CRITERIA: dict = {}


@pytest.fixture
def criterion():
    """Record an acceptance line; the summary is printed at the end of the run."""
    def record(number, title, passed, detail=""):
        tag = "PASS" if passed else "FAIL"
        _CRITERIA.setdefault(number, []).append(f"{tag} criterion {number:>2}: {title}  [{detail}]")
        print(_CRITERIA[number][-1])
        return passed
    return record


@pytest.fixture
def note():
    def record(number, text):
        _CRITERIA.setdefault(number, []).append(f"INFO criterion {number:>2}: {text}")
        print(_CRITERIA[number][-1])
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        for line in _CRITERIA[number]:
            terminalreporter.write_line(line)
