from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from advlinreg.norms import Dataset

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_dataset(rng: np.random.Generator, n: int, p: int) -> Dataset:
    return Dataset(rng.standard_normal((n, p)), rng.standard_normal(n))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


# one line per acceptance criterion, shown in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
