"""Subset of Data: exact GPR on ``m`` selected training points."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .exact import ExactModel, PredictiveDistribution, exact_logml, exact_predict, exact_train
from .kernel import Hyperparameters, _as_2d
from .selection import SubsetChoice, choose_subset


@dataclass
class SodModel:
    subset: SubsetChoice
    inner: ExactModel
    selection_seconds: float = 0.0

    @property
    def hp(self) -> Hyperparameters:
        return self.inner.hp


def _resolve_subset(X, m, selector, seed, subset):
    if subset is not None:
        return subset, 0.0
    t0 = time.perf_counter()
    subset = choose_subset(X, m, selector, seed)
    return subset, time.perf_counter() - t0


def sod_train(X, y, m: int, hp: Hyperparameters, selector: str = "random", seed: int = 0,
              subset: SubsetChoice | None = None) -> SodModel:
    """Select ``m`` rows (unless ``subset`` is given) and fit exact GPR to them only."""
    X = _as_2d(X)
    y = np.asarray(y, dtype=float).ravel()
    subset, sel_time = _resolve_subset(X, m, selector, seed, subset)
    idx = subset.indices
    inner = exact_train(X[idx], y[idx], hp)
    return SodModel(subset, inner, sel_time)


def sod_predict(model: SodModel, Xstar) -> PredictiveDistribution:
    return exact_predict(model.inner, Xstar)


def sod_logml(X, y, m: int, hp: Hyperparameters, selector: str = "random", seed: int = 0,
              subset: SubsetChoice | None = None):
    X = _as_2d(X)
    y = np.asarray(y, dtype=float).ravel()
    subset, _ = _resolve_subset(X, m, selector, seed, subset)
    idx = subset.indices
    return exact_logml(X[idx], y[idx], hp)
