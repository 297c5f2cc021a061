import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neokit.eigensolvers import Spectrum
from neokit.losses import (IllConditionedError, NotOrthonormalError, align_modes, evaluate, loss_gradient,
                           loss_value, ortho_loss, span_loss)
from neokit.subspace import RitzResult, weighted_orthonormalize


def random_instance(seed, N=60, m=7, k=4):
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.2, 2.0, N)
    U = weighted_orthonormalize(rng.standard_normal((N, k)), w).Y
    return rng, w, U, rng.standard_normal((N, m))


def ritz_from(spectrum, w):
    Y = weighted_orthonormalize(spectrum.vectors, w).Y
    return RitzResult(spectrum.values.copy(), spectrum.vectors.copy(), Y, np.zeros(spectrum.k))


def test_span_loss_extremes(sphere_problem):
    _, ops, spectrum = sphere_problem
    U, w = spectrum.vectors[:, :4], ops.mass
    assert abs(span_loss(U, w, U, basis="orthonormal").span_loss) < 1e-12
    other = spectrum.vectors[:, 4:8]
    assert abs(span_loss(other, w, U, basis="orthonormal").span_loss - 1) < 1e-12


def test_span_loss_orthogonal_rotation(sphere_problem, rng):
    _, ops, spectrum = sphere_problem
    U, w = spectrum.vectors[:, :6], ops.mass
    Y = weighted_orthonormalize(rng.standard_normal((w.size, 9)), w).Y
    R, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    a = span_loss(Y, w, U, basis="orthonormal").span_loss
    b = span_loss(Y, w, U @ R, basis="orthonormal").span_loss
    assert abs(a - b) < 1e-12
    assert abs(span_loss(U @ R, w, U, basis="orthonormal").span_loss) < 1e-12


@given(seed=st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_qr_and_gram_routes_agree(seed):
    _, w, U, F = random_instance(seed)
    a = span_loss(F, w, U, method="qr").span_loss
    b = span_loss(F, w, U, method="gram").span_loss
    assert abs(a - b) < 1e-9


@given(seed=st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_span_loss_is_a_span_function(seed):
    rng, w, U, F = random_instance(seed)
    G = rng.standard_normal((F.shape[1], F.shape[1])) + 3 * np.eye(F.shape[1])
    assert abs(span_loss(F @ G, w, U).span_loss - span_loss(F, w, U).span_loss) < 1e-9


def test_target_must_be_orthonormal():
    _, w, U, F = random_instance(0)
    with pytest.raises(NotOrthonormalError):
        span_loss(F, w, 2 * U)


def test_ortho_loss_closed_forms():
    _, w, U, F = random_instance(1)
    assert ortho_loss(U, w) < 1e-24
    assert ortho_loss(2 * U, w) == pytest.approx(9 * U.shape[1], rel=1e-12)
    G = np.zeros((F.shape[1], F.shape[1]))
    for i in range(F.shape[1]):
        for j in range(F.shape[1]):
            G[i, j] = sum(F[n, i] * w[n] * F[n, j] for n in range(F.shape[0]))
    brute = sum((G[i, j] - (i == j)) ** 2 for i in range(len(G)) for j in range(len(G)))
    assert ortho_loss(F, w) == pytest.approx(brute, rel=1e-12)


def test_total_combines_terms():
    _, w, U, F = random_instance(2)
    rep = loss_value(F, w, U, alpha=1e-3)
    assert rep.total == pytest.approx(rep.span_loss + 1e-3 * rep.ortho_loss, rel=1e-15)
    assert 0 <= rep.span_loss_clamped <= 1


def finite_difference(F, w, U, alpha, h=1e-6):
    G = np.zeros_like(F)
    for idx in np.ndindex(F.shape):
        Fp, Fm = F.copy(), F.copy()
        Fp[idx] += h
        Fm[idx] -= h
        G[idx] = (loss_value(Fp, w, U, alpha, method="gram").total
                  - loss_value(Fm, w, U, alpha, method="gram").total) / (2 * h)
    return G


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed):
    _, w, U, F = random_instance(seed, N=30, m=5, k=3)
    grad, rep = loss_gradient(F, w, U, 1e-3)
    fd = finite_difference(F, w, U, 1e-3)
    scale = np.abs(fd).max()
    assert np.abs(grad - fd).max() < 1e-5 * scale
    assert rep.total == pytest.approx(loss_value(F, w, U, 1e-3).total, rel=1e-9)


def test_gradient_vanishes_at_target():
    _, w, U, _ = random_instance(3)
    grad, rep = loss_gradient(U, w, U, 1e-3)
    assert np.linalg.norm(grad) < 1e-8
    assert abs(rep.span_loss) < 1e-12


def test_gradient_orthogonal_to_span_preserving_moves():
    rng, w, U, _ = random_instance(4, k=4)
    F = U @ (rng.standard_normal((4, 4)) + 2 * np.eye(4))
    grad, _ = loss_gradient(F, w, U, 0.0)
    for _ in range(5):
        H = rng.standard_normal((4, 4))
        assert abs((grad * (F @ H)).sum()) < 1e-8


def test_gradient_rejects_collapsed_fields():
    _, w, U, F = random_instance(5)
    F[:, 1] = F[:, 0]
    with pytest.raises(IllConditionedError):
        loss_gradient(F, w, U, 1e-3)


def test_align_identity(sphere_problem):
    _, ops, spectrum = sphere_problem
    res = align_modes(ritz_from(spectrum, ops.mass), spectrum, ops.mass)
    np.testing.assert_array_equal(res.vectors, spectrum.vectors)


def test_align_swapped_modes(sphere_problem):
    _, ops, spectrum = sphere_problem
    pred = ritz_from(spectrum, ops.mass)
    order = np.arange(spectrum.k)
    order[[3, 4]] = [4, 3]
    pred.values, pred.vectors = pred.values[order], pred.vectors[:, order]
    res = align_modes(pred, spectrum, ops.mass)
    np.testing.assert_array_equal(res.vectors, spectrum.vectors)


def test_align_random_signs(sphere_problem, rng):
    _, ops, spectrum = sphere_problem
    pred = ritz_from(spectrum, ops.mass)
    pred.vectors = pred.vectors * rng.choice([-1.0, 1.0], spectrum.k)
    rep = evaluate(pred, spectrum, ops.mass)
    assert np.abs(rep.evec_mse_per_mode).max() == 0.0


def test_evaluate_identical(sphere_problem):
    _, ops, spectrum = sphere_problem
    rep = evaluate(ritz_from(spectrum, ops.mass), spectrum, ops.mass)
    assert np.abs(rep.span_per_mode).max() < 1e-12
    assert rep.eval_rel_err == 0.0
    assert json.loads(rep.to_json())["means"]["evec"] == 0.0


def test_evaluate_mixed_pair(sphere_problem):
    _, ops, spectrum = sphere_problem
    pred = ritz_from(spectrum, ops.mass)
    i, j = 5, 9
    pred.vectors[:, i] = (spectrum.vectors[:, i] + spectrum.vectors[:, j]) / np.sqrt(2)
    rep = evaluate(pred, spectrum, ops.mass)
    assert abs(rep.evec_mse_per_mode[i] - (2 - np.sqrt(2))) < 1e-12


def test_evaluate_excludes_zero_modes():
    w = np.ones(4)
    U = np.eye(4)[:, :3]
    spectrum = Spectrum(np.array([0.0, 0.0, 2.0]), U)
    pred = RitzResult(np.array([1e-14, 0.0, 2.2]), U.copy(), U.copy(), np.zeros(3))
    rep = evaluate(pred, spectrum, w)
    assert rep.excluded_modes == [1]
    assert rep.eval_rel_err == pytest.approx(0.1)


def test_mode_count_mismatch(sphere_problem):
    _, ops, spectrum = sphere_problem
    pred = ritz_from(spectrum, ops.mass)
    pred.values = pred.values[:-1]
    with pytest.raises(ValueError):
        align_modes(pred, spectrum, ops.mass)
