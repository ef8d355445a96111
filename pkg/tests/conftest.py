import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))


def random_hermitian(rng, n, m=None, complex_=False):
    A = rng.standard_normal((n, n))
    if complex_:
        A = A + 1j * rng.standard_normal((n, n))
    A = 0.5 * (A + A.conj().T)
    if m is not None:
        idx = np.arange(n)
        A[np.abs(idx[:, None] - idx[None, :]) > m] = 0
    return A


def floyd_warshall(adj):
    """All-pairs hop distances by Floyd-Warshall (independent of BFS)."""
    n = adj.shape[0]
    D = np.where(adj, 1.0, np.inf)
    np.fill_diagonal(D, 0.0)
    for k in range(n):
        D = np.minimum(D, D[:, [k]] + D[[k], :])
    return D


def roundoff_floor(A):
    """Absolute accuracy of a dense-eigensolver oracle: entries below this are noise."""
    A = np.asarray(A)
    return 100 * A.shape[0] * np.finfo(float).eps * max(1.0, float(np.max(np.abs(A))))


def assert_entries_below(E, bound):
    E = np.abs(np.asarray(E))
    excess = E - np.asarray(bound)
    assert np.max(excess) <= roundoff_floor(E), f"max excess {np.max(excess):.3e}"
