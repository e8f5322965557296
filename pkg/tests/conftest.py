import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("lab", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("lab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py::test_criterion_" not in rep.nodeid or rep.when != "call":
                continue
            name = rep.nodeid.split("::test_criterion_", 1)[1]
            detail = dict(rep.user_properties).get("detail", "")
            lines.append((name, "PASS" if outcome == "passed" else "FAIL", detail))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in sorted(lines, key=lambda x: (int(x[0].split("_")[0]), x[0])):
        terminalreporter.write_line(f"criterion {name}: {status}  {detail}")
