import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def clusters(n, d, seed=0, k=8, spread=4.0, sigma=0.5):
    rng = np.random.default_rng(seed)
    cent = rng.standard_normal((k, d)) * spread
    return cent[rng.integers(0, k, n)] + rng.standard_normal((n, d)) * sigma


@pytest.fixture
def line_points():
    # 1-D instance {0, 1, 10}
    return np.array([[0.0], [1.0], [10.0]])


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, name: str, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
