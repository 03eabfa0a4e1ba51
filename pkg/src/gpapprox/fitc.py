"""FITC sparse approximation with inducing points drawn from the training inputs.

The FITC covariance on the training set is ``Q + diag(K - Q)`` with
``Q = K_fu K_uu^{-1} K_uf``. The diagonal correction and the noise
variance are folded into one vector ``g = diag(K) - diag(Q) + noise``,
so the effective training covariance is ``Q + diag(g)`` and every
solve goes through the m x m matrix ``A = I + V diag(1/g) V^T`` with
``V = L_uu^{-1} K_uf``. Nothing of size n x n is ever formed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .exact import (
    LOG_2PI,
    PredictiveDistribution,
    _check_xy,
    iter_blocks,
    jitter_cholesky,
    latent_variance_floor,
)
from .kernel import Hyperparameters, _as_2d, dimension_sqdist, kernel_eval, kernel_matrix
from .selection import SubsetChoice, choose_subset


def _same_instance(a, b) -> bool:
    if a is b:
        return True
    if isinstance(a, np.ndarray) and isinstance(b, np.ndarray):
        ia, ib = a.__array_interface__, b.__array_interface__
        return ia["data"] == ib["data"] and a.shape == b.shape and a.strides == b.strides
    return False


def fitc_kernel_eval(x_i, x_j, U, hp: Hyperparameters, same: bool | None = None) -> float:
    """k_FITC between two points given inducing inputs ``U``.

    Returns ``k(x_i, u) K_uu^{-1} k(u, x_j)`` unless the two arguments are
    the same point instance, in which case the exact ``k(x_i, x_i)`` is
    returned. ``same`` defaults to an identity check that also accepts two
    views of the same memory (so ``X[i], X[i]`` counts as one point).
    """
    if same is None:
        same = _same_instance(x_i, x_j)
    if same:
        return kernel_eval(x_i, x_i, hp)
    U = _as_2d(U)
    Luu, _ = jitter_cholesky(kernel_matrix(U, None, hp))
    a = linalg.solve_triangular(Luu, kernel_matrix(U, x_i, hp)[:, 0], lower=True)
    b = linalg.solve_triangular(Luu, kernel_matrix(U, x_j, hp)[:, 0], lower=True)
    return float(a @ b)


@dataclass
class FitcModel:
    """Trained FITC predictor.

    ``beta`` gives the mean as ``k(x*, U) @ beta``; the latent variance is
    ``k** - |L_uu^{-1} k_u*|^2 + |L_a^{-1} L_uu^{-1} k_u*|^2``.
    """

    inducing: SubsetChoice
    inducing_inputs: np.ndarray
    beta: np.ndarray
    chol_uu: np.ndarray
    chol_a: np.ndarray
    hp: Hyperparameters
    jitter: float = 0.0
    selection_seconds: float = 0.0
    timings: dict = field(default_factory=dict)
    opt: object = None

    @property
    def m(self) -> int:
        return self.inducing_inputs.shape[0]


@dataclass
class _Core:
    Kuu: np.ndarray
    Kuf: np.ndarray
    Luu: np.ndarray
    V: np.ndarray
    g: np.ndarray
    La: np.ndarray
    jitter: float


def _factor(X, U, hp: Hyperparameters) -> _Core:
    Kuu = kernel_matrix(U, None, hp)
    Luu, jitter = jitter_cholesky(Kuu)
    Kuf = kernel_matrix(U, X, hp)
    V = linalg.solve_triangular(Luu, Kuf, lower=True, check_finite=False)
    qdiag = np.einsum("ij,ij->j", V, V)
    g = np.maximum(hp.signal_variance - qdiag, 0.0) + hp.noise_variance
    Vg = V / np.sqrt(g)
    A = Vg @ Vg.T
    A[np.diag_indices_from(A)] += 1.0
    La, _ = jitter_cholesky(A)
    return _Core(Kuu, Kuf, Luu, V, g, La, jitter)


def _resolve_inducing(X, m, selector, seed, subset):
    if subset is not None:
        return subset, 0.0
    t0 = time.perf_counter()
    subset = choose_subset(X, m, selector, seed)
    return subset, time.perf_counter() - t0


def fitc_train(X, y, m: int, hp: Hyperparameters, selector: str = "random", seed: int = 0,
               subset: SubsetChoice | None = None) -> FitcModel:
    X, y = _check_xy(X, y)
    hp.check_dim(X.shape[1])
    subset, sel_time = _resolve_inducing(X, m, selector, seed, subset)
    U = X[subset.indices]
    core = _factor(X, U, hp)
    r = core.V @ (y / core.g)
    c = linalg.solve_triangular(core.La, r, lower=True, check_finite=False)
    c = linalg.solve_triangular(core.La, c, lower=True, trans="T", check_finite=False)
    beta = linalg.solve_triangular(core.Luu, c, lower=True, trans="T", check_finite=False)
    if not np.all(np.isfinite(beta)):
        raise np.linalg.LinAlgError("FITC training produced non-finite weights")
    return FitcModel(subset, U, beta, core.Luu, core.La, hp, core.jitter, sel_time)


def fitc_predict(model: FitcModel, Xstar) -> PredictiveDistribution:
    Xstar = _as_2d(Xstar)
    U, hp = model.inducing_inputs, model.hp
    if Xstar.shape[1] != U.shape[1]:
        raise ValueError(f"dimension mismatch: {Xstar.shape[1]} vs {U.shape[1]}")
    t = Xstar.shape[0]
    mean = np.empty(t)
    var = np.empty(t)
    sf2 = hp.signal_variance
    for blk in iter_blocks(t, model.m):
        Ku = kernel_matrix(U, Xstar[blk], hp)
        mean[blk] = Ku.T @ model.beta
        v1 = linalg.solve_triangular(model.chol_uu, Ku, lower=True, check_finite=False)
        v2 = linalg.solve_triangular(model.chol_a, v1, lower=True, check_finite=False)
        var[blk] = sf2 - np.einsum("ij,ij->j", v1, v1) + np.einsum("ij,ij->j", v2, v2)
    np.clip(var, latent_variance_floor(hp), sf2, out=var)
    return PredictiveDistribution(mean, var, var + hp.noise_variance)


def fitc_logml(X, y, m: int, hp: Hyperparameters, selector: str = "random", seed: int = 0,
               subset: SubsetChoice | None = None, with_grad: bool = True):
    """FITC log marginal likelihood and gradient (lengthscales, signal, noise) in O(m^2 n)."""
    X, y = _check_xy(X, y)
    hp.check_dim(X.shape[1])
    subset, _ = _resolve_inducing(X, m, selector, seed, subset)
    U = X[subset.indices]
    n = X.shape[0]
    core = _factor(X, U, hp)
    V, g, La, Luu = core.V, core.g, core.La, core.Luu

    r = V @ (y / g)
    w = linalg.cho_solve((La, True), r, check_finite=False)
    alpha = (y - V.T @ w) / g
    logdet = float(np.sum(np.log(g))) + 2.0 * float(np.sum(np.log(np.diag(La))))
    logml = -0.5 * float(y @ alpha) - 0.5 * logdet - 0.5 * n * LOG_2PI
    if not np.isfinite(logml):
        raise np.linalg.LinAlgError("FITC marginal likelihood is not finite")
    if not with_grad:
        return logml, None

    # W = alpha alpha^T - Sigma^{-1}, Sigma^{-1} = diag(1/g) - P^T P, B = K_uu^{-1} K_uf.
    # dL/dtheta = sum(dKuf * Cuf) - 0.5 sum(dKuu * Cuu) + 0.5 sum(diagW * dkdiag)
    B = linalg.solve_triangular(Luu, V, lower=True, trans="T", check_finite=False)
    P = linalg.solve_triangular(La, V / g, lower=True, check_finite=False)
    diagW = alpha * alpha - 1.0 / g + np.einsum("ij,ij->j", P, P)
    Ba = B @ alpha
    BP = B @ P.T
    Cuf = np.outer(Ba, alpha) - B / g + BP @ P - B * diagW
    Cuu = np.outer(Ba, Ba) - (B * (1.0 / g + diagW)) @ B.T + BP @ BP.T

    grad = np.empty(hp.n_params)
    Kuf, Kuu = core.Kuf, core.Kuu
    if hp.isotropic:
        grad[0] = (float(np.sum(Kuf * dimension_sqdist(U, X, hp, None) * Cuf))
                   - 0.5 * float(np.sum(Kuu * dimension_sqdist(U, None, hp, None) * Cuu)))
    else:
        for d in range(hp.n_lengthscales):
            grad[d] = (float(np.sum(Kuf * dimension_sqdist(U, X, hp, d) * Cuf))
                       - 0.5 * float(np.sum(Kuu * dimension_sqdist(U, U, hp, d) * Cuu)))
    grad[-2] = (2.0 * float(np.sum(Kuf * Cuf)) - float(np.sum(Kuu * Cuu))
                + hp.signal_variance * float(np.sum(diagW)))
    grad[-1] = hp.noise_variance * float(np.sum(diagW))
    return logml, grad


def hybrid_train(X, y, m: int, hp0: Hyperparameters, selector: str = "random", seed: int = 0,
                 budget=None, subset: SubsetChoice | None = None) -> FitcModel:
    """Learn hyperparameters with the SoD likelihood on the subset, then fit FITC on it.

    ``model.timings`` holds ``hyper_seconds`` (optimizer on the SoD
    objective) and ``train_seconds`` (the final FITC fit) separately.
    """
    from .optimizer import OptBudget, maximize_logml
    from .sod import sod_logml

    X, y = _check_xy(X, y)
    budget = OptBudget() if budget is None else budget
    subset, sel_time = _resolve_inducing(X, m, selector, seed, subset)

    t0 = time.perf_counter()
    opt = maximize_logml(lambda hp: sod_logml(X, y, m, hp, subset=subset), hp0, budget)
    t1 = time.perf_counter()
    model = fitc_train(X, y, m, opt.theta, subset=subset)
    t2 = time.perf_counter()
    model.selection_seconds = sel_time
    model.timings = {"hyper_seconds": t1 - t0, "train_seconds": t2 - t1}
    model.opt = opt
    return model
