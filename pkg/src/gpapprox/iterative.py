"""Conjugate-gradient training for the GP mean predictor.

Solves ``(K + noise*I) alpha = y`` through a matrix-vector-multiply
operator, recording the relative residual, the elapsed solve time and
(optionally) test-set SMSE of the mean predictor built from each
intermediate ``alpha_t``. Any operator with an ``apply`` method can be
plugged in, e.g. a fast approximate MVM.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exact import iter_blocks
from .kernel import Hyperparameters, _as_2d, kernel_matrix


class MvmOperator:
    """Symmetric positive-definite linear operator ``v -> A v`` of size ``n``."""

    n: int = 0
    # kernel evaluations needed per apply, for cost accounting
    kernel_evals_per_apply: int = 0

    def apply(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, v):
        return self.apply(v)


class MatrixOperator(MvmOperator):
    def __init__(self, A):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("operator matrix must be square")
        self.A = A
        self.n = A.shape[0]
        self.kernel_evals_per_apply = 0

    def apply(self, v):
        return self.A @ v


class DenseKernelOperator(MvmOperator):
    """``K + noise*I`` for fixed inputs and hyperparameters.

    With ``materialize=True`` the matrix is built once (O(n^2) memory);
    otherwise kernel rows are regenerated in blocks on every apply.
    """

    def __init__(self, X, hp: Hyperparameters, materialize: bool = True):
        self.X = _as_2d(X)
        self.hp = hp
        self.n = self.X.shape[0]
        self.kernel_evals_per_apply = self.n * self.n
        self.materialize = materialize
        self._A = None
        if materialize:
            A = kernel_matrix(self.X, None, hp)
            A[np.diag_indices_from(A)] += hp.noise_variance
            self._A = A

    def apply(self, v):
        v = np.asarray(v, dtype=float)
        if self._A is not None:
            return self._A @ v
        out = np.empty(self.n)
        for blk in iter_blocks(self.n, self.n):
            out[blk] = kernel_matrix(self.X[blk], self.X, self.hp) @ v
        out += self.hp.noise_variance * v
        return out


class OperatorCheckError(ValueError):
    pass


def preflight(op: MvmOperator, seed: int = 0, tol: float = 1e-8) -> None:
    """Check linearity and symmetry of ``op`` on random vectors; raise on failure."""
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal(op.n), rng.standard_normal(op.n)
    a, b = rng.standard_normal(2)
    Ou, Ov = op.apply(u), op.apply(v)
    lhs = op.apply(a * u + b * v)
    rhs = a * Ou + b * Ov
    scale = max(np.linalg.norm(rhs), np.finfo(float).tiny)
    if np.linalg.norm(lhs - rhs) > tol * scale:
        raise OperatorCheckError("operator is not linear to the required tolerance")
    s1, s2 = float(u @ Ov), float(v @ Ou)
    if abs(s1 - s2) > tol * max(abs(s1), abs(s2), np.linalg.norm(u) * np.linalg.norm(Ov)):
        raise OperatorCheckError("operator is not symmetric to the required tolerance")


@dataclass
class Termination:
    """Stop at whichever limit is hit first.

    ``max_iter`` caps the iteration count, ``rtol`` the relative residual
    and ``max_seconds`` the solve time (monitor time excluded). With only
    ``rtol`` set, the iteration cap defaults to ``10 n``.
    """

    max_iter: int | None = None
    rtol: float | None = None
    max_seconds: float | None = None

    def iteration_cap(self, n: int) -> int:
        if self.max_iter is not None:
            return int(self.max_iter)
        return 10 * n if (self.rtol is not None or self.max_seconds is not None) else n


def default_schedule(iteration: int) -> bool:
    """Evaluate the monitor every iteration up to 32, then every 4th."""
    return iteration <= 32 or iteration % 4 == 0


@dataclass
class SolveTrace:
    iterations: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    smse: list = field(default_factory=list)
    stop_reason: str = ""
    final_true_residual: float = math.nan

    def record(self, it, res, sec, err=math.nan):
        self.iterations.append(int(it))
        self.residuals.append(float(res))
        self.seconds.append(float(sec))
        self.smse.append(float(err))

    def __len__(self):
        return len(self.iterations)

    def rows(self):
        return list(zip(self.iterations, self.residuals, self.seconds, self.smse))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "residual", "seconds", "smse"])
            for it, res, sec, err in self.rows():
                w.writerow([it, repr(res), repr(sec), "NA" if math.isnan(err) else repr(err)])


class CGBreakdown(FloatingPointError):
    """Non-finite or non-positive curvature encountered; carries the partial result."""

    def __init__(self, message, alpha, trace):
        super().__init__(message)
        self.alpha = alpha
        self.trace = trace


def cg_solve(op: MvmOperator, y, termination: Termination | None = None,
             monitor: Callable | None = None, schedule: Callable = default_schedule):
    """Conjugate gradients from a zero start.

    The recorded residual is CG's recursively updated residual norm over
    ``|y|``; ``trace.final_true_residual`` is recomputed with one extra
    apply after the loop. ``monitor(alpha_t)`` results go in the trace's
    smse column when ``schedule(t)`` is true; their cost is not timed.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != op.n:
        raise ValueError(f"right-hand side has length {y.shape[0]}, operator has size {op.n}")
    if not np.all(np.isfinite(y)):
        raise ValueError("right-hand side must be finite")
    termination = termination or Termination()
    cap = termination.iteration_cap(op.n)
    trace = SolveTrace()
    x = np.zeros(op.n)
    ynorm = float(np.linalg.norm(y))
    if ynorm == 0.0:
        trace.record(0, 0.0, 0.0, monitor(x) if monitor else math.nan)
        trace.stop_reason = "zero right-hand side"
        trace.final_true_residual = 0.0
        return x, trace

    trace.record(0, 1.0, 0.0, monitor(x) if monitor else math.nan)
    r = y.copy()
    p = r.copy()
    rs = float(r @ r)
    elapsed = 0.0
    trace.stop_reason = "max iterations"
    for it in range(1, cap + 1):
        t0 = time.perf_counter()
        Ap = op.apply(p)
        pAp = float(p @ Ap)
        if not np.isfinite(pAp) or pAp <= 0.0:
            trace.stop_reason = "breakdown"
            raise CGBreakdown(f"CG breakdown at iteration {it}: p^T A p = {pAp}", x, trace)
        a = rs / pAp
        x += a * p
        r -= a * Ap
        rs_new = float(r @ r)
        elapsed += time.perf_counter() - t0
        if not np.isfinite(rs_new) or not np.all(np.isfinite(x)):
            trace.stop_reason = "breakdown"
            raise CGBreakdown(f"non-finite values at iteration {it}", x, trace)
        rel = math.sqrt(rs_new) / ynorm
        err = monitor(x) if (monitor is not None and schedule(it)) else math.nan
        trace.record(it, rel, elapsed, err)
        if termination.rtol is not None and rel < termination.rtol:
            trace.stop_reason = "relative residual"
            break
        if termination.max_seconds is not None and elapsed >= termination.max_seconds:
            trace.stop_reason = "time budget"
            break
        if rs_new == 0.0:
            trace.stop_reason = "exact solution"
            break
        t0 = time.perf_counter()
        p = r + (rs_new / rs) * p
        rs = rs_new
        elapsed += time.perf_counter() - t0
    trace.final_true_residual = float(np.linalg.norm(op.apply(x) - y)) / ynorm
    return x, trace


def mean_from_alpha(X, hp: Hyperparameters, alpha, Xstar) -> np.ndarray:
    """Predictive means ``k(x*, X) @ alpha``."""
    X, Xstar = _as_2d(X), _as_2d(Xstar)
    alpha = np.asarray(alpha, dtype=float).ravel()
    if alpha.shape[0] != X.shape[0]:
        raise ValueError("alpha length does not match the training set")
    out = np.empty(Xstar.shape[0])
    for blk in iter_blocks(Xstar.shape[0], X.shape[0]):
        out[blk] = kernel_matrix(Xstar[blk], X, hp) @ alpha
    return out


def smse_monitor(X, hp: Hyperparameters, Xstar, ystar, trivial, max_cached: int = 40_000_000):
    """Build ``alpha -> test SMSE``; caches the test cross-covariance when it fits."""
    from .metrics import smse

    X, Xstar = _as_2d(X), _as_2d(Xstar)
    if X.shape[0] * Xstar.shape[0] <= max_cached:
        Ks = kernel_matrix(Xstar, X, hp)
        return lambda alpha: smse(Ks @ alpha, ystar, trivial)
    return lambda alpha: smse(mean_from_alpha(X, hp, alpha, Xstar), ystar, trivial)
