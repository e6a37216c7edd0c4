import functools

import numpy as np
import pytest

from dpplab.orthopoly import build_system, quadratic_potential


@functools.lru_cache(maxsize=None)
def quadratic_system(n: int, per_unit: float = 200.0):
    return build_system(quadratic_potential(), n, per_unit=per_unit)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


KAPPA0 = float(np.sqrt(2.0) / np.pi)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[k])
