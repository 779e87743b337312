import numpy as np
import pytest

from oakeshmm import ProbParams


def random_params(rng, k, c, conc=1.0, floor=0.02):
    """Interior parameters drawn from Dirichlet distributions, bounded away from zero."""

    def simplex(size, n):
        v = rng.dirichlet(np.full(n, conc), size=size)
        v = (v + floor) / (1 + n * floor)
        return v

    lam = simplex(None, k)
    pi = simplex(k, k)
    phi = simplex(k, c).T
    return ProbParams(lam, pi, phi)


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


@pytest.fixture
def p_k2c3():
    return ProbParams(
        [0.7, 0.3],
        [[0.85, 0.15], [0.1, 0.9]],
        [[0.8, 0.15], [0.15, 0.35], [0.05, 0.5]],
    )
