"""Full Gaussian process regression with Cholesky factorization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .kernel import Hyperparameters, _as_2d, dimension_sqdist, kernel_matrix

LOG_2PI = math.log(2.0 * math.pi)

# Jitter ladder, relative to the mean diagonal entry.
JITTER_START = 1e-10
JITTER_MAX = 1e-4

# Test points are processed in blocks so cross-covariances stay below this many entries.
PREDICT_BLOCK_ENTRIES = 4_000_000


class CholeskyError(np.linalg.LinAlgError):
    """Raised when a matrix cannot be factorized even after the full jitter ladder."""

    def __init__(self, jitters):
        self.jitters = list(jitters)
        levels = ", ".join(f"{j:.1e}" for j in self.jitters)
        super().__init__(f"Cholesky factorization failed; tried jitter {levels}")


def jitter_cholesky(A: np.ndarray):
    """Lower Cholesky factor of ``A``, adding diagonal jitter only if needed.

    Returns ``(L, jitter)`` with ``jitter`` the absolute amount added (0.0
    when the plain factorization succeeded). Retries start at
    ``1e-10 * mean(diag)`` and grow tenfold up to ``1e-4 * mean(diag)``.
    ``A`` is never modified.
    """
    try:
        return linalg.cholesky(A, lower=True, check_finite=False), 0.0
    except linalg.LinAlgError:
        pass
    if not np.all(np.isfinite(A)):
        raise CholeskyError([0.0])
    scale = float(np.mean(np.diag(A)))
    tried = [0.0]
    rel = JITTER_START
    while rel <= JITTER_MAX * (1 + 1e-9):
        jitter = rel * scale
        tried.append(jitter)
        Aj = A.copy()
        Aj[np.diag_indices_from(Aj)] += jitter
        try:
            return linalg.cholesky(Aj, lower=True, overwrite_a=True, check_finite=False), jitter
        except linalg.LinAlgError:
            pass
        rel *= 10.0
    raise CholeskyError(tried)


def cholesky_inverse(L: np.ndarray) -> np.ndarray:
    """Inverse of ``L @ L.T`` from its lower Cholesky factor."""
    inv, info = linalg.lapack.dpotri(L, lower=1)
    if info != 0:
        raise np.linalg.LinAlgError(f"dpotri failed with info={info}")
    inv = np.tril(inv)
    inv = inv + np.tril(inv, -1).T
    return inv


def _check_xy(X, y):
    X = _as_2d(X)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] < 1:
        raise ValueError("need at least one training point")
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"{X.shape[0]} inputs but {y.shape[0]} targets")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    return X, y


@dataclass
class PredictiveDistribution:
    """Per-test-point predictive moments.

    ``latent_variance`` is the variance of f(x*) and
    ``observation_variance`` adds the noise variance.
    """

    mean: np.ndarray
    latent_variance: np.ndarray
    observation_variance: np.ndarray

    def __len__(self):
        return self.mean.shape[0]

    @classmethod
    def concatenate(cls, parts):
        return cls(
            np.concatenate([p.mean for p in parts]),
            np.concatenate([p.latent_variance for p in parts]),
            np.concatenate([p.observation_variance for p in parts]),
        )


@dataclass
class ExactModel:
    training_inputs: np.ndarray
    cholesky_factor: np.ndarray
    alpha: np.ndarray
    hp: Hyperparameters
    jitter: float = 0.0

    @property
    def n(self) -> int:
        return self.training_inputs.shape[0]


def exact_train(X, y, hp: Hyperparameters) -> ExactModel:
    """Factorize ``K + noise*I`` and solve for the weight vector alpha."""
    X, y = _check_xy(X, y)
    hp.check_dim(X.shape[1])
    A = kernel_matrix(X, None, hp)
    A[np.diag_indices_from(A)] += hp.noise_variance
    L, jitter = jitter_cholesky(A)
    alpha = linalg.cho_solve((L, True), y, check_finite=False)
    return ExactModel(X, L, alpha, hp, jitter)


def latent_variance_floor(hp: Hyperparameters) -> float:
    # Rounding can push k** - q below zero; variances are kept strictly positive.
    return np.finfo(float).eps * hp.signal_variance


def iter_blocks(t: int, n: int):
    step = max(1, PREDICT_BLOCK_ENTRIES // max(n, 1))
    for start in range(0, t, step):
        yield slice(start, min(t, start + step))


def exact_predict(model: ExactModel, Xstar) -> PredictiveDistribution:
    Xstar = _as_2d(Xstar)
    X, hp = model.training_inputs, model.hp
    if Xstar.shape[1] != X.shape[1]:
        raise ValueError(f"dimension mismatch: {Xstar.shape[1]} vs {X.shape[1]}")
    t = Xstar.shape[0]
    mean = np.empty(t)
    var = np.empty(t)
    sf2 = hp.signal_variance
    for blk in iter_blocks(t, model.n):
        Ks = kernel_matrix(X, Xstar[blk], hp)  # n x b
        mean[blk] = Ks.T @ model.alpha
        v = linalg.solve_triangular(model.cholesky_factor, Ks, lower=True, check_finite=False)
        var[blk] = sf2 - np.einsum("ij,ij->j", v, v)
    np.maximum(var, latent_variance_floor(hp), out=var)
    return PredictiveDistribution(mean, var, var + hp.noise_variance)


def gram_logml(A: np.ndarray, y: np.ndarray):
    """Log density of ``y`` under N(0, A). Returns ``(logml, chol, alpha, jitter)``."""
    L, jitter = jitter_cholesky(A)
    alpha = linalg.cho_solve((L, True), y, check_finite=False)
    n = y.shape[0]
    logml = -0.5 * float(y @ alpha) - float(np.sum(np.log(np.diag(L)))) - 0.5 * n * LOG_2PI
    return logml, L, alpha, jitter


def exact_logml(X, y, hp: Hyperparameters, with_grad: bool = True):
    """Log marginal likelihood and its gradient over the log-hyperparameters.

    The gradient is ordered lengthscales, signal, noise.
    """
    X, y = _check_xy(X, y)
    hp.check_dim(X.shape[1])
    K = kernel_matrix(X, None, hp)
    A = K.copy()
    A[np.diag_indices_from(A)] += hp.noise_variance
    logml, L, alpha, _ = gram_logml(A, y)
    if not with_grad:
        return logml, None
    del A
    # W = alpha alpha^T - (K + s2 I)^{-1}; dL/dtheta = 0.5 tr(W dK/dtheta)
    W = cholesky_inverse(L)
    np.negative(W, out=W)
    W += np.outer(alpha, alpha)
    grad = np.empty(hp.n_params)
    WK = W * K
    if hp.isotropic:
        grad[0] = 0.5 * float(np.sum(WK * dimension_sqdist(X, None, hp, None)))
    else:
        for d in range(hp.n_lengthscales):
            grad[d] = 0.5 * float(np.sum(WK * dimension_sqdist(X, None, hp, d)))
    grad[-2] = float(np.sum(WK))
    grad[-1] = hp.noise_variance * float(np.trace(W))
    return logml, grad
