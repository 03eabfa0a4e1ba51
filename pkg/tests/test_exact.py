import math

import mpmath
import numpy as np
import pytest

from gpapprox.exact import (
    CholeskyError,
    PredictiveDistribution,
    cholesky_inverse,
    exact_logml,
    exact_predict,
    exact_train,
    jitter_cholesky,
)
from gpapprox.kernel import Hyperparameters, kernel_matrix
from gpapprox.metrics import TrivialPredictor, smse

from conftest import central_diff, dense_gp, random_hp


def test_scalar_alpha():
    hp = Hyperparameters.create(1.0, 1.0, 1.0)
    model = exact_train([[0.5]], [2.0], hp)
    assert model.alpha[0] == pytest.approx(1.0, rel=1e-15)


def test_alpha_matches_extended_precision_inverse(rng):
    hp = random_hp(rng, 2)
    X = rng.standard_normal((3, 2))
    y = rng.standard_normal(3)
    A = kernel_matrix(X, None, hp) + hp.noise_variance * np.eye(3)
    with mpmath.workdps(50):
        Am = mpmath.matrix(A.tolist())
        ref = np.array([float(v) for v in (Am ** -1) * mpmath.matrix(y.tolist())])
    np.testing.assert_allclose(exact_train(X, y, hp).alpha, ref, rtol=1e-12)


def test_zero_targets_zero_alpha(rng):
    model = exact_train(rng.standard_normal((5, 2)), np.zeros(5), random_hp(rng, 2))
    assert np.all(model.alpha == 0.0)


def test_model_invariants(rng):
    hp = random_hp(rng, 3)
    X, y = rng.standard_normal((40, 3)), rng.standard_normal(40)
    model = exact_train(X, y, hp)
    A = kernel_matrix(X, None, hp) + hp.noise_variance * np.eye(40)
    L = model.cholesky_factor
    assert np.linalg.norm(L @ L.T - A) / np.linalg.norm(A) < 1e-8
    assert np.linalg.norm(A @ model.alpha - y) / np.linalg.norm(y) < 1e-6


def test_interpolation_with_tiny_noise(rng):
    hp = Hyperparameters.create(1.0, 1.0, 1e-5)
    X = rng.standard_normal((10, 2))
    y = np.sin(X[:, 0]) + X[:, 1]
    pred = exact_predict(exact_train(X, y, hp), X[3])
    assert pred.mean[0] == pytest.approx(y[3], abs=1e-6)


def test_prior_reversion_far_away(rng):
    hp = random_hp(rng, 2)
    X, y = rng.standard_normal((10, 2)), rng.standard_normal(10)
    pred = exact_predict(exact_train(X, y, hp), [[1e3, 1e3]])
    assert abs(pred.mean[0]) < 1e-12
    assert pred.latent_variance[0] == pytest.approx(hp.signal_variance, rel=1e-12)
    assert pred.observation_variance[0] == pytest.approx(hp.signal_variance + hp.noise_variance)


def test_predict_matches_dense_inverse(rng):
    hp = random_hp(rng, 3)
    X, y, Xs = rng.standard_normal((8, 3)), rng.standard_normal(8), rng.standard_normal((3, 3))
    pred = exact_predict(exact_train(X, y, hp), Xs)
    mean, var = dense_gp(kernel_matrix(X, None, hp), kernel_matrix(Xs, X, hp),
                         np.full(3, hp.signal_variance), y, hp.noise_variance)
    np.testing.assert_allclose(pred.mean, mean, rtol=1e-10)
    np.testing.assert_allclose(pred.latent_variance, var, rtol=1e-9)
    np.testing.assert_allclose(pred.observation_variance, var + hp.noise_variance, rtol=1e-10)


def test_predict_dimension_mismatch(rng):
    model = exact_train(rng.standard_normal((4, 2)), rng.standard_normal(4), random_hp(rng, 2))
    with pytest.raises(ValueError):
        exact_predict(model, rng.standard_normal((2, 3)))


def test_predict_blocked_equals_unblocked(rng, monkeypatch):
    import gpapprox.exact as ex

    hp = random_hp(rng, 2)
    model = exact_train(rng.standard_normal((30, 2)), rng.standard_normal(30), hp)
    Xs = rng.standard_normal((50, 2))
    full = exact_predict(model, Xs)
    monkeypatch.setattr(ex, "PREDICT_BLOCK_ENTRIES", 64)
    blocked = exact_predict(model, Xs)
    # different BLAS kernels per block size: equal up to rounding
    np.testing.assert_allclose(full.mean, blocked.mean, rtol=1e-11, atol=1e-14)
    np.testing.assert_allclose(full.latent_variance, blocked.latent_variance, rtol=1e-11)


def test_variances_positive_and_bounded(rng):
    hp = random_hp(rng, 2, noise=1e-4)
    X = rng.standard_normal((50, 2))
    pred = exact_predict(exact_train(X, rng.standard_normal(50), hp), np.vstack([X, X + 1e-9]))
    assert np.all(pred.latent_variance > 0)
    assert np.all(pred.latent_variance <= hp.signal_variance)
    assert np.all(pred.observation_variance > hp.noise_variance * (1 - 1e-12))


def test_duplicate_point_never_increases_variance(rng):
    for _ in range(5):
        hp = random_hp(rng, 2)
        X, y = rng.standard_normal((16, 2)), rng.standard_normal(16)
        Xs = rng.standard_normal((20, 2))
        before = exact_predict(exact_train(X, y, hp), Xs).latent_variance
        k = rng.integers(16)
        after = exact_predict(exact_train(np.vstack([X, X[k]]), np.append(y, y[k]), hp),
                              Xs).latent_variance
        assert np.all(after <= before + 1e-12)


def test_logml_scalar_case():
    hp = Hyperparameters.create(1.0, 1.0, 1.0)
    L, _ = exact_logml([[0.0]], [0.0], hp)
    assert L == pytest.approx(-0.5 * math.log(2) - 0.5 * math.log(2 * math.pi), rel=1e-15)


def test_logml_matches_dense_density(rng):
    hp = random_hp(rng, 2)
    X, y = rng.standard_normal((12, 2)), rng.standard_normal(12)
    A = kernel_matrix(X, None, hp) + hp.noise_variance * np.eye(12)
    _, logdet = np.linalg.slogdet(A)
    ref = -0.5 * y @ np.linalg.solve(A, y) - 0.5 * logdet - 6 * math.log(2 * math.pi)
    assert exact_logml(X, y, hp)[0] == pytest.approx(ref, rel=1e-11)


@pytest.mark.parametrize("ard", [True, False])
def test_logml_gradient_finite_differences(rng, ard):
    for _ in range(20):
        hp = random_hp(rng, 3, ard)
        X, y = rng.standard_normal((10, 3)), rng.standard_normal(10)
        _, g = exact_logml(X, y, hp)
        fd = central_diff(lambda t: exact_logml(X, y, Hyperparameters.from_vector(t), False)[0],
                          hp.to_vector())
        assert np.max(np.abs(g - fd)) / np.max(np.abs(fd)) < 1e-5


def test_logml_decreases_with_target_scale(rng):
    hp = random_hp(rng, 2)
    X, y = rng.standard_normal((10, 2)), rng.standard_normal(10)
    vals = [exact_logml(X, c * y, hp, with_grad=False)[0] for c in (1.0, 2.0, 4.0, 8.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_training_fit_beats_trivial(rng):
    hp = Hyperparameters.create(1.0, 1.0, 1e-3)
    X = rng.standard_normal((60, 2))
    y = np.sin(2 * X[:, 0]) * X[:, 1]
    pred = exact_predict(exact_train(X, y, hp), X)
    assert smse(pred.mean, y, TrivialPredictor.from_targets(y)) < 1.0


def test_jitter_ladder_rescues_semidefinite():
    v = np.array([1.0, 2.0, 3.0])
    A = np.outer(v, v)
    before = A.copy()
    L, jitter = jitter_cholesky(A)
    assert jitter > 0
    np.testing.assert_array_equal(A, before)
    assert np.allclose(L @ L.T, A + jitter * np.eye(3))


def test_jitter_not_used_when_unnecessary():
    L, jitter = jitter_cholesky(np.eye(3) * 2.0)
    assert jitter == 0.0


def test_factorization_failure_lists_levels():
    A = np.array([[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(CholeskyError) as info:
        jitter_cholesky(A)
    assert len(info.value.jitters) == 8
    assert "1.0e-10" in str(info.value) or "tried jitter" in str(info.value)


def test_cholesky_inverse(rng):
    B = rng.standard_normal((6, 6))
    A = B @ B.T + 6 * np.eye(6)
    L = np.linalg.cholesky(A)
    np.testing.assert_allclose(cholesky_inverse(L), np.linalg.inv(A), rtol=1e-10, atol=1e-14)


def test_training_input_errors(rng):
    hp = random_hp(rng, 2)
    with pytest.raises(ValueError):
        exact_train(rng.standard_normal((3, 2)), [1.0, np.nan, 0.0], hp)
    with pytest.raises(ValueError):
        exact_train(rng.standard_normal((3, 2)), [1.0, 2.0], hp)


def test_predictive_concatenate():
    a = PredictiveDistribution(np.array([1.0]), np.array([2.0]), np.array([3.0]))
    both = PredictiveDistribution.concatenate([a, a])
    assert len(both) == 2 and both.observation_variance.tolist() == [3.0, 3.0]
