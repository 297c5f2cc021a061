import numpy as np
import pytest

from neokit import laplacian as lp
from neokit import shapes
from neokit.eigensolvers import smallest_eigenpairs_dense


@pytest.fixture(scope="session")
def sphere_problem():
    """Small normalized sphere cloud with its k-NN operators and 16 oracle pairs."""
    X = lp.normalize_cloud(shapes.sphere_cloud(400, seed=3))
    ops = lp.build_knn_laplacian(X, 12)
    spectrum = smallest_eigenpairs_dense(ops.L, ops.mass, 16)
    return X, ops, spectrum


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
