import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from neokit.numerics import (DimensionError, NotSymmetricError, as_sparse_symmetric, dense_sym_eig,
                             is_symmetric, spmv, thin_qr)


def random_sym(n, seed, density=0.1):
    A = sp.random(n, n, density=density, random_state=seed)
    return as_sparse_symmetric(A + A.T)


def test_spmv_identity():
    np.testing.assert_array_equal(spmv(as_sparse_symmetric(sp.identity(3)), np.array([1.0, 2, 3])), [1, 2, 3])


def test_spmv_two_by_two():
    A = as_sparse_symmetric(np.array([[2.0, 1], [1, 2]]))
    np.testing.assert_array_equal(spmv(A, np.array([1.0, 0])), [2, 1])


@given(n=st.integers(1, 256), seed=st.integers(0, 2**31 - 1))
@settings(max_examples=40, deadline=None)
def test_spmv_matches_dense(n, seed):
    A = random_sym(n, seed)
    x = np.random.default_rng(seed).standard_normal(n)
    ref = A.toarray() @ x
    np.testing.assert_allclose(spmv(A, x), ref, rtol=1e-13, atol=1e-13 * max(np.abs(ref).max(), 1))


def test_spmv_dimension_mismatch():
    with pytest.raises(DimensionError):
        spmv(as_sparse_symmetric(sp.identity(3)), np.ones(4))


def test_nonsymmetric_rejected():
    with pytest.raises(NotSymmetricError):
        as_sparse_symmetric(np.array([[1.0, 2], [0, 1]]))
    assert not is_symmetric(sp.csr_matrix(np.array([[1.0, 2], [0, 1]])))


def test_explicit_diagonal_inserted():
    A = as_sparse_symmetric(sp.csr_matrix(np.array([[0.0, 1], [1, 0]])))
    assert A.nnz == 4
    np.testing.assert_array_equal(A.toarray(), [[0, 1], [1, 0]])


def test_qr_of_orthonormal_input(rng):
    Z, _ = np.linalg.qr(rng.standard_normal((20, 5)))
    Q, R = thin_qr(Z)
    signs = np.sign((Q * Z).sum(axis=0))
    np.testing.assert_allclose(Q * signs, Z, atol=1e-14)
    np.testing.assert_allclose(np.abs(R), np.eye(5), atol=1e-14)


def test_qr_single_column():
    Q, R = thin_qr(np.array([[3.0], [4.0]]))
    np.testing.assert_allclose(Q, [[0.6], [0.8]], rtol=1e-15)
    np.testing.assert_allclose(R, [[5.0]], rtol=1e-15)


def test_qr_reconstruction(rng):
    Z = rng.standard_normal((50, 8))
    Q, R = thin_qr(Z)
    assert np.linalg.norm(Q @ R - Z) / np.linalg.norm(Z) < 1e-13
    assert (np.diag(R) >= 0).all()


@given(n=st.integers(1, 60), m=st.integers(1, 12), seed=st.integers(0, 2**31 - 1))
@settings(max_examples=60, deadline=None)
def test_qr_contract(n, m, seed):
    m = min(m, n)
    Z = np.random.default_rng(seed).standard_normal((n, m))
    Q, R = thin_qr(Z)
    assert np.linalg.norm(Q.T @ Q - np.eye(m)) < 1e-12
    assert np.linalg.norm(Q @ R - Z) < 1e-12 * np.linalg.norm(Z)
    assert np.allclose(R, np.triu(R))


def test_eig_diagonal():
    vals, vecs = dense_sym_eig(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_array_equal(vals, [1, 2, 3])
    np.testing.assert_allclose(np.abs(vecs), np.eye(3)[:, [1, 2, 0]], atol=0)


def test_eig_two_by_two():
    vals, _ = dense_sym_eig(np.array([[2.0, 1], [1, 2]]))
    np.testing.assert_allclose(vals, [1, 3], rtol=1e-15)


def test_eig_residual(rng):
    B = rng.standard_normal((64, 64))
    A = B + B.T
    vals, V = dense_sym_eig(A)
    assert np.linalg.norm(A @ V - V * vals) < 1e-10 * np.linalg.norm(A)
    assert np.all(np.diff(vals) >= 0)


@given(n=st.integers(1, 40), seed=st.integers(0, 2**31 - 1))
@settings(max_examples=40, deadline=None)
def test_eig_trace(n, seed):
    B = np.random.default_rng(seed).standard_normal((n, n))
    A = B + B.T + np.eye(n) * 2 * n
    vals, _ = dense_sym_eig(A)
    assert abs(vals.sum() - np.trace(A)) < 1e-10 * abs(np.trace(A))


def test_eig_rejects_nonsymmetric():
    with pytest.raises(NotSymmetricError):
        dense_sym_eig(np.array([[1.0, 1.0], [0.0, 1.0]]))
