import numpy as np
import pytest

from lasercool import LambdaSystem


@pytest.fixture
def canonical_system():
    return LambdaSystem(2.0, 1.0)


@pytest.fixture
def canonical_spectrum():
    return np.array([0.5, 0.3, 0.2])


def robin_hood_pair(rng, n=3):
    """Random (x, y) with x strictly majorized by y.

    Start from a random sorted simplex point y and transfer part of a gap
    from a larger entry to a smaller one, which strictly lowers every purity
    ordering.
    """
    y = np.sort(rng.dirichlet(np.ones(n)))[::-1]
    a, b = sorted(rng.choice(n, size=2, replace=False))
    if y[a] - y[b] < 1e-9:
        return robin_hood_pair(rng, n)
    delta = rng.uniform(0.1, 0.9) * (y[a] - y[b]) / 2.0
    x = y.copy()
    x[a] -= delta
    x[b] += delta
    return np.sort(x)[::-1], y
