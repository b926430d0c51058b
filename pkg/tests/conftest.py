import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from causalfuse.admg import Admg

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_admg(rng: np.random.Generator, n: int, p_dir: float = 0.35, p_bi: float = 0.2) -> Admg:
    names = [f"V{i}" for i in range(n)]
    order = list(rng.permutation(n))
    directed = [
        (names[order[i]], names[order[j]])
        for i, j in itertools.combinations(range(n), 2)
        if rng.random() < p_dir
    ]
    bidirected = [(names[i], names[j]) for i, j in itertools.combinations(range(n), 2) if rng.random() < p_bi]
    return Admg(names, directed, bidirected)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
