import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from factorseq.panel import Panel

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def noise_panel(rng):
    return Panel.from_array(rng.standard_normal((6, 300)))


ACCEPTANCE = pytest.StashKey[dict]()
N_CRITERIA = 10


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def criterion(request):
    """Record ``criterion k: PASS/FAIL detail`` for the end-of-run summary."""
    lines = request.config.stash[ACCEPTANCE]

    def record(k: int, ok: bool, detail: str) -> bool:
        lines[k] = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(lines[k])
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, N_CRITERIA + 1):
        terminalreporter.write_line(lines.get(k, f"criterion {k}: FAIL  (not evaluated: deselected or errored before recording)"))
