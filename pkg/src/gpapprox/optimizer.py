"""Gradient-based maximization of (approximate) log marginal likelihoods.

The search is Polak-Ribiere nonlinear conjugate gradients with a
cubic/quadratic interpolating line search under the Wolfe-Powell
conditions, the scheme used by Rasmussen's ``minimize.m``. The budget
counts objective evaluations (``minimize.m`` with a negative length), so
``max_evals`` is a hard cap: no evaluation is ever made beyond it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .kernel import Hyperparameters

log = logging.getLogger(__name__)

# Line-search constants from minimize.m.
INT = 0.1      # don't re-evaluate within 0.1 of the current bracket
EXT = 3.0      # extrapolate at most 3 times the current step
MAX = 20       # at most 20 evaluations per line search
RATIO = 10.0   # maximum allowed slope ratio
SIG = 0.1      # Wolfe-Powell curvature constant
RHO = SIG / 2  # sufficient-decrease constant


@dataclass
class OptBudget:
    """Evaluation budget and convergence tolerances.

    ``gtol`` stops when the gradient norm drops below it; ``ftol`` stops
    when an accepted step improves L by less than ``ftol * max(1, |L|)``.
    """

    max_evals: int = 100
    gtol: float = 1e-8
    ftol: float = 1e-12

    def __post_init__(self):
        if self.max_evals < 0:
            raise ValueError("evaluation budget must be non-negative")


@dataclass
class OptResult:
    theta: object
    logml: float | None
    n_evals: int
    trace: list = field(default_factory=list)  # (eval index, L) of accepted iterates
    message: str = ""


class ObjectiveError(RuntimeError):
    pass


def default_hyperparameters(X, y, ard: bool = True) -> Hyperparameters:
    """Unit lengthscales, signal std = std(y), noise std = std(y)/10."""
    X = np.asarray(X, dtype=float)
    dim = X.shape[1] if X.ndim == 2 else 1
    sy = float(np.std(y))
    if not sy > 0:
        sy = 1.0
    n_ell = dim if ard else 1
    return Hyperparameters(np.zeros(n_ell), np.log(sy), np.log(sy / 10.0))


def maximize_logml(objective: Callable, theta0, budget: OptBudget | None = None) -> OptResult:
    """Maximize ``objective(theta) -> (L, dL/dtheta)`` starting from ``theta0``.

    ``theta0`` may be a :class:`Hyperparameters` (the objective then
    receives Hyperparameters) or a plain vector. Failed or non-finite
    evaluations at trial points shrink the step; a failure at ``theta0``
    raises :class:`ObjectiveError`.
    """
    budget = OptBudget() if budget is None else budget
    as_hp = isinstance(theta0, Hyperparameters)
    x = theta0.to_vector() if as_hp else np.asarray(theta0, dtype=float).copy()
    wrap = Hyperparameters.from_vector if as_hp else (lambda v: v)
    length = int(budget.max_evals)
    if length == 0:
        return OptResult(theta0, None, 0, [], "zero budget")

    count = 0

    def f(v):
        # minimize.m minimizes; work with -L throughout.
        nonlocal count
        count += 1
        L, g = objective(wrap(v))
        g = np.asarray(g, dtype=float)
        if not np.isfinite(L) or not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite objective")
        return -float(L), -g

    try:
        f0, df0 = f(x)
    except Exception as exc:  # noqa: BLE001 - any failure at the start is fatal
        raise ObjectiveError(f"objective failed at the initial point: {exc}") from exc
    trace = [(count, -f0)]
    i = count
    s = -df0
    d0 = -float(s @ s)
    x3 = 1.0 / (1.0 - d0)
    ls_failed = False
    message = "budget exhausted"

    while i < length:
        if np.linalg.norm(df0) < budget.gtol:
            message = "gradient tolerance"
            break
        X0, F0, dF0 = x.copy(), f0, df0.copy()
        M = min(MAX, length - i)
        # extrapolation phase
        while True:
            x2, f2, d2 = 0.0, f0, d0
            f3, df3 = f0, df0
            success = False
            while not success and M > 0:
                M -= 1
                i += 1
                try:
                    f3, df3 = f(x + x3 * s)
                    success = True
                except Exception as exc:  # noqa: BLE001
                    log.debug("trial point failed (%s); halving step", exc)
                    x3 = (x2 + x3) / 2.0
            if f3 < F0:
                X0, F0, dF0 = x + x3 * s, f3, df3.copy()
            d3 = float(df3 @ s)
            if d3 > SIG * d0 or f3 > f0 + x3 * RHO * d0 or M == 0:
                break
            x1, f1, d1 = x2, f2, d2
            x2, f2, d2 = x3, f3, d3
            A = 6.0 * (f1 - f2) + 3.0 * (d2 + d1) * (x2 - x1)
            B = 3.0 * (f2 - f1) - (2.0 * d1 + d2) * (x2 - x1)
            disc = B * B - A * d1 * (x2 - x1)
            denom = B + np.sqrt(disc) if disc >= 0 else np.nan
            x3 = x1 - d1 * (x2 - x1) ** 2 / denom if denom else np.nan
            if not np.isfinite(x3) or x3 < 0:
                x3 = x2 * EXT
            elif x3 > x2 * EXT:
                x3 = x2 * EXT
            elif x3 < x2 + INT * (x2 - x1):
                x3 = x2 + INT * (x2 - x1)

        # interpolation phase
        x4, f4, d4 = x3, f3, d3
        while (abs(d3) > -SIG * d0 or f3 > f0 + x3 * RHO * d0) and M > 0:
            if d3 > 0 or f3 > f0 + x3 * RHO * d0:
                x4, f4, d4 = x3, f3, d3
            else:
                x2, f2, d2 = x3, f3, d3
            if f4 > f0:
                x3 = x2 - (0.5 * d2 * (x4 - x2) ** 2) / (f4 - f2 - d2 * (x4 - x2))
            else:
                A = 6.0 * (f2 - f4) / (x4 - x2) + 3.0 * (d4 + d2)
                B = 3.0 * (f4 - f2) - (2.0 * d2 + d4) * (x4 - x2)
                disc = B * B - A * d2 * (x4 - x2) ** 2
                x3 = x2 + (np.sqrt(disc) - B) / A if disc >= 0 and A != 0 else np.nan
            if not np.isfinite(x3):
                x3 = (x2 + x4) / 2.0
            x3 = max(min(x3, x4 - INT * (x4 - x2)), x2 + INT * (x4 - x2))
            M -= 1
            i += 1
            try:
                f3, df3 = f(x + x3 * s)
            except Exception as exc:  # noqa: BLE001
                log.debug("trial point failed (%s); treating as too far", exc)
                f3, df3 = np.inf, df3
                d3 = 1.0
                continue
            if f3 < F0:
                X0, F0, dF0 = x + x3 * s, f3, df3.copy()
            d3 = float(df3 @ s)

        if abs(d3) < -SIG * d0 and f3 < f0 + x3 * RHO * d0:
            # line search succeeded
            improvement = f0 - f3
            x = x + x3 * s
            f0 = f3
            trace.append((count, -f0))
            s = (float(df3 @ df3) - float(df0 @ df3)) / float(df0 @ df0) * s - df3
            df0 = df3
            d3 = d0
            d0 = float(df0 @ s)
            if d0 > 0:
                s = -df0
                d0 = -float(s @ s)
            x3 = x3 * min(RATIO, d3 / (d0 - np.finfo(float).tiny))
            ls_failed = False
            if improvement < budget.ftol * max(1.0, abs(f0)):
                message = "function tolerance"
                break
        else:
            # restore the best point seen and restart along steepest descent
            if F0 < f0:
                trace.append((count, -F0))
            x, f0, df0 = X0, F0, dF0
            if ls_failed or i >= length:
                message = "line search failed" if ls_failed else "budget exhausted"
                break
            s = -df0
            d0 = -float(s @ s)
            x3 = 1.0 / (1.0 - d0)
            ls_failed = True

    return OptResult(wrap(x), -f0, count, trace, message)
