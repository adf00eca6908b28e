import functools

import pytest

from landauspec.operators import assemble_L


@pytest.fixture(scope="session")
def cached_l():
    """Memoized operator assembly shared across the session.

    Sweeps and acceptance checks revisit the same (m, k_max, eps) triples;
    callers must treat the returned matrices as read-only.
    """
    return functools.lru_cache(maxsize=None)(assemble_L)
