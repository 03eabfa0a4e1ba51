"""Squared-exponential covariance (isotropic and ARD) in log-parameterization.

Hyperparameter vectors are always ordered as
``[log_lengthscales..., log_signal_std, log_noise_std]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Tile edge for the cache-friendly in-place symmetrization of distance matrices.
SYM_BLOCK = 256


@dataclass(frozen=True)
class Hyperparameters:
    """Log-hyperparameters of an SE kernel plus Gaussian observation noise.

    A single log-lengthscale means the isotropic kernel; ``D`` of them
    means ARD.
    """

    log_lengthscales: np.ndarray
    log_signal_std: float
    log_noise_std: float

    def __post_init__(self):
        ell = np.atleast_1d(np.asarray(self.log_lengthscales, dtype=float)).copy()
        if ell.ndim != 1 or ell.size == 0:
            raise ValueError("log_lengthscales must be a non-empty vector")
        ell.setflags(write=False)
        object.__setattr__(self, "log_lengthscales", ell)
        object.__setattr__(self, "log_signal_std", float(self.log_signal_std))
        object.__setattr__(self, "log_noise_std", float(self.log_noise_std))
        if not (np.all(np.isfinite(ell)) and np.isfinite(self.log_signal_std)
                and np.isfinite(self.log_noise_std)):
            raise ValueError("hyperparameters must be finite")

    @classmethod
    def create(cls, lengthscale=1.0, signal_std=1.0, noise_std=0.1, dim=None):
        """Build from natural-scale values; ``dim`` broadcasts a scalar lengthscale to ARD."""
        ell = np.atleast_1d(np.asarray(lengthscale, dtype=float))
        if dim is not None and ell.size == 1:
            ell = np.repeat(ell, dim)
        return cls(np.log(ell), np.log(signal_std), np.log(noise_std))

    @property
    def isotropic(self) -> bool:
        return self.log_lengthscales.size == 1

    @property
    def n_lengthscales(self) -> int:
        return self.log_lengthscales.size

    @property
    def n_params(self) -> int:
        return self.log_lengthscales.size + 2

    @property
    def lengthscales(self) -> np.ndarray:
        return np.exp(self.log_lengthscales)

    @property
    def signal_variance(self) -> float:
        return float(np.exp(2.0 * self.log_signal_std))

    @property
    def noise_variance(self) -> float:
        return float(np.exp(2.0 * self.log_noise_std))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.log_lengthscales, [self.log_signal_std, self.log_noise_std]])

    @classmethod
    def from_vector(cls, theta) -> "Hyperparameters":
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1 or theta.size < 3:
            raise ValueError("hyperparameter vector needs at least 3 entries")
        return cls(theta[:-2], theta[-2], theta[-1])

    def with_noise(self, noise_std: float) -> "Hyperparameters":
        return Hyperparameters(self.log_lengthscales, self.log_signal_std, np.log(noise_std))

    def to_dict(self) -> dict:
        return {
            "log_lengthscales": [float(v) for v in self.log_lengthscales],
            "log_signal_std": self.log_signal_std,
            "log_noise_std": self.log_noise_std,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparameters":
        return cls(d["log_lengthscales"], d["log_signal_std"], d["log_noise_std"])

    def __eq__(self, other):
        if not isinstance(other, Hyperparameters):
            return NotImplemented
        return np.array_equal(self.to_vector(), other.to_vector())

    def __hash__(self):
        return hash(self.to_vector().tobytes())

    def check_dim(self, dim: int) -> None:
        if not (self.isotropic or self.n_lengthscales == dim):
            raise ValueError(
                f"{self.n_lengthscales} lengthscales do not match input dimension {dim}"
            )


def _as_2d(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError("inputs must be a matrix (rows are points)")
    return X


def kernel_eval(x, x2, hp: Hyperparameters) -> float:
    """k(x, x') for two single points."""
    x = np.asarray(x, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x.shape != x2.shape:
        raise ValueError(f"dimension mismatch: {x.size} vs {x2.size}")
    hp.check_dim(x.size)
    r = (x - x2) / hp.lengthscales
    return hp.signal_variance * float(np.exp(-0.5 * np.dot(r, r)))


def scaled_sqdist(X, X2=None, hp: Hyperparameters | None = None) -> np.ndarray:
    """Squared distances after dividing each input dimension by its lengthscale.

    Uses ``|a|^2 + |b|^2 - 2 a.b`` with negatives clamped to zero. With
    ``X2`` omitted the result is exactly symmetric with a zero diagonal.
    """
    X = _as_2d(X)
    if hp is not None:
        hp.check_dim(X.shape[1])
        X = X / hp.lengthscales
    if X2 is None:
        sq = np.einsum("ij,ij->i", X, X)
        d2 = _inner_products(X, X)
        d2 *= -2.0
        d2 += sq[:, None]
        d2 += sq[None, :]
        _symmetrize(d2)
        np.fill_diagonal(d2, 0.0)
    else:
        X2 = _as_2d(X2)
        if X2.shape[1] != X.shape[1]:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {X2.shape[1]}")
        if hp is not None:
            X2 = X2 / hp.lengthscales
        d2 = _inner_products(X, X2)
        d2 *= -2.0
        d2 += np.einsum("ij,ij->i", X, X)[:, None]
        d2 += np.einsum("ij,ij->i", X2, X2)[None, :]
    np.maximum(d2, 0.0, out=d2)
    return d2


def _inner_products(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    # A plain gemm on a contiguous copy of B^T; numpy routes A @ A.T through
    # syrk, which is markedly slower for the thin matrices used here.
    return np.dot(A, np.ascontiguousarray(B.T))


def _symmetrize(S: np.ndarray, block: int = SYM_BLOCK) -> None:
    """Replace square ``S`` by ``(S + S^T) / 2`` in place, tile by tile."""
    n = S.shape[0]
    for i in range(0, n, block):
        d = S[i:i + block, i:i + block]
        d[...] = 0.5 * (d + d.T)
        for j in range(i + block, n, block):
            up = S[i:i + block, j:j + block]
            lo = S[j:j + block, i:i + block]
            up += lo.T
            up *= 0.5
            lo[...] = up.T


def kernel_matrix(X, X2=None, hp: Hyperparameters = None) -> np.ndarray:
    """Gram matrix ``K[i, j] = k(X[i], X2[j])``; ``X2=None`` means ``X2 = X``."""
    if hp is None:
        raise TypeError("hyperparameters are required")
    X = _as_2d(X)
    if X2 is not None:
        X2 = _as_2d(X2)
        if X2.shape[1] != X.shape[1]:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {X2.shape[1]}")
    d2 = scaled_sqdist(X, X2, hp)
    K = np.exp(-0.5 * d2, out=d2)
    K *= hp.signal_variance
    return K


def kernel_diag(X, hp: Hyperparameters) -> np.ndarray:
    X = _as_2d(X)
    hp.check_dim(X.shape[1])
    return np.full(X.shape[0], hp.signal_variance)


def dimension_sqdist(X, X2, hp: Hyperparameters, d: int | None) -> np.ndarray:
    """``(x_d - x'_d)^2 / l_d^2`` for one dimension, or summed over all for isotropic."""
    X = _as_2d(X)
    X2 = X if X2 is None else _as_2d(X2)
    if d is None:
        return scaled_sqdist(X, None if X2 is X else X2, hp)
    ell = hp.lengthscales[d]
    diff = (X[:, d][:, None] - X2[:, d][None, :]) / ell
    return diff * diff


def kernel_matrix_grad(X, hp: Hyperparameters, which: int, X2=None, K=None) -> np.ndarray:
    """Derivative of the Gram matrix with respect to log-hyperparameter ``which``.

    Indices ``0 .. n_lengthscales-1`` are log-lengthscales and
    ``n_lengthscales`` is the log signal std. The noise term is not part of
    the kernel and is handled by callers.
    """
    X = _as_2d(X)
    nl = hp.n_lengthscales
    if not 0 <= which <= nl:
        raise IndexError(f"hyperparameter index {which} out of range [0, {nl}]")
    if K is None:
        K = kernel_matrix(X, X2, hp)
    if which == nl:
        return 2.0 * K
    d = None if hp.isotropic else which
    return K * dimension_sqdist(X, X2, hp, d)
