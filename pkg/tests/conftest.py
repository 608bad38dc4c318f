import numpy as np
import pytest

from ddn.model import DdnModel


def random_model(rng, n, f=3, v_scale=1.5, symmetric=False, sparsity=0.0):
    v = rng.normal(0.0, v_scale, size=(n, n))
    if symmetric:
        v = np.triu(v, 1)
        v = v + v.T
    if sparsity:
        v[rng.random((n, n)) < sparsity] = 0.0
    np.fill_diagonal(v, 0.0)
    return DdnModel(w=rng.normal(size=(n, f)), v=v, b=rng.normal(size=n))


@pytest.fixture
def pair_model():
    """Two labels, b = (0.5, -0.5), v12 = v21 = 2, features unused."""
    return DdnModel(w=np.zeros((2, 1)), v=[[0.0, 2.0], [2.0, 0.0]], b=[0.5, -0.5])


@pytest.fixture
def pair_features():
    return np.zeros(1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
