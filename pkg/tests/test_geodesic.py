import numpy as np
import pytest

from neokit import laplacian as lp
from neokit import shapes
from neokit.eigensolvers import smallest_eigenpairs_dense
from neokit.geodesic import DisconnectedMeshError, heat_geodesic


@pytest.fixture(scope="module")
def sphere3():
    V, F = shapes.icosphere(3)
    return lp.TriangleMesh(V, F)


def test_source_distance_zero(sphere3):
    res = heat_geodesic(sphere3, 17)
    assert res.distances[17] == 0.0
    assert res.distances.min() >= -1e-9


def test_level3_distance_shape(sphere3):
    d = heat_geodesic(sphere3, 0).distances
    exact = shapes.great_circle_distance(sphere3.positions, sphere3.positions[0])
    assert np.abs(d - exact).max() / exact.max() < 0.05


def test_deflated_agrees(sphere3):
    ops = lp.build_cotan_laplacian(sphere3)
    Y = smallest_eigenpairs_dense(ops.L, ops.mass, 32).vectors
    plain = heat_geodesic(sphere3, 5)
    defl = heat_geodesic(sphere3, 5, solver="deflated", Y=Y)
    assert np.abs(plain.distances - defl.distances).max() < 1e-6
    assert defl.poisson.iterations < plain.poisson.iterations


def test_multiple_sources(sphere3):
    d = heat_geodesic(sphere3, [0, 100]).distances
    assert min(d[0], d[100]) == 0.0


def test_disconnected_mesh():
    V, F = shapes.icosphere(1)
    P = np.vstack([V, V + 5])
    mesh = lp.TriangleMesh(P, np.vstack([F, F + len(V)]))
    with pytest.raises(DisconnectedMeshError, match="components"):
        heat_geodesic(mesh, 0)


def test_deflated_needs_basis(sphere3):
    with pytest.raises(ValueError):
        heat_geodesic(sphere3, 0, solver="deflated")
