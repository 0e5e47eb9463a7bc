import sys
import math

import numpy as np
import pytest

from additive_lab import hamel
from additive_lab.core import Oracle


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def basis2():
    return hamel.HamelBasis.standard(2)


@pytest.fixture
def wild(basis2):
    """{e1 -> 0, e2 -> 2 pi} over (1, sqrt 2)."""
    return hamel.AdditiveMap(basis2, {1: 1}, scale=2 * math.pi)


def real(func, dim=1, **kw):
    """Vectorized oracle from a function of the (N, dim) array."""
    return Oracle(lambda X: np.asarray(func(X), dtype=float), dim, **kw)


def cplx(func, dim=1, **kw):
    return Oracle(lambda X: np.asarray(func(X), dtype=complex), dim, kind="complex", **kw)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
