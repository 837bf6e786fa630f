import pytest
from hypothesis import HealthCheck, settings

# derandomized so a green run stays green; raise max_examples locally to explore
settings.register_profile(
    "default",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("explore", deadline=None, max_examples=2000, derandomize=False)
settings.load_profile("default")


_ACCEPTANCE_KEY = "twinsense_acceptance_lines"


def pytest_configure(config):
    setattr(config, _ACCEPTANCE_KEY, [])


@pytest.fixture
def acceptance_log(request):
    """Collects one PASS/FAIL line per acceptance criterion for the run summary."""
    lines = getattr(request.config, _ACCEPTANCE_KEY)

    def record(number, title, passed, detail):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        lines.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, _ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
