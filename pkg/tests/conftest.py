import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def report(request):
    """Record one summary line per acceptance criterion."""
    lines = request.config.__dict__.setdefault("_criterion_lines", [])

    def _report(number: int, passed: bool, detail: str):
        line = f"CRITERION {number:2d}: {'PASS' if passed else 'FAIL'} - {detail}"
        lines.append(line)
        print(line)

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criterion_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
