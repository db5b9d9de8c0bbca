import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ritz_extract import CsrMatrix
from ritz_extract.dense import orthonormalize

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_problem(rng, n=30, k=6):
    A = crandn(rng, n, n)
    return A, CsrMatrix.from_dense(A), orthonormalize(crandn(rng, n, k))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
