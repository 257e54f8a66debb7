import pytest


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def criterion_line(request):
    """Append a line to the acceptance summary printed at the end of the run."""
    return request.config.acceptance_lines.append


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
