from functools import lru_cache

import pytest

from h2plus_exchange.basis import enumerate_basis
from h2plus_exchange.integrals import build_matrices
from h2plus_exchange.mpkernel import PrecisionContext


@lru_cache(maxsize=None)
def matrices(R, Omega, digits):
    """Matrices shared between tests; read-only by convention."""
    ctx = PrecisionContext(digits)
    return build_matrices(enumerate_basis(Omega, R), ctx)


@pytest.fixture
def ctx50():
    ctx = PrecisionContext(50)
    with ctx.activate():
        yield ctx


def rel(a, b):
    return abs(a - b) / abs(b)
