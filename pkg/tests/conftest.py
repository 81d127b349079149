import numpy as np
import pytest

from quor import GroupSample


def random_groups(rng, n, m_max=8, q_choices=(0.25, 0.5, 0.75), m_min=1, spread=1.0):
    """n continuous random groups with random sizes, shifts and quantile levels."""
    groups = []
    for i in range(n):
        m = int(rng.integers(m_min, m_max + 1))
        shift = rng.normal(0.0, spread)
        vals = rng.normal(shift, 1.0, size=m)
        q = float(rng.choice(q_choices))
        groups.append(GroupSample.from_unsorted(vals, q, chr(ord("A") + i)))
    return groups


def separated(m, q=0.5, gap=0.0, n=2):
    """n groups of size m, each entirely above the previous."""
    return [
        GroupSample(np.arange(m, dtype=float) + i * (m + gap), q, chr(ord("A") + i))
        for i in range(n)
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(20140601)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, whatever the verbosity."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", ()))
            if "criterion" in props and rep.when == "call" or (outcome == "error" and "criterion" in props):
                status = "PASS" if outcome == "passed" else "FAIL"
                lines.append((props["criterion"], f"{status}  {props['criterion']}: {props.get('detail', '')}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
