"""Standardized mean squared error and mean standardized log loss."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class TrivialPredictor:
    """Predicts the training-target mean and (biased, 1/n) variance everywhere."""

    train_mean: float
    train_variance: float

    @classmethod
    def from_targets(cls, y_train) -> "TrivialPredictor":
        y = np.asarray(y_train, dtype=float).ravel()
        return cls(float(np.mean(y)), float(np.var(y)))


def _pair(pred, y):
    pred = np.asarray(pred, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if pred.shape != y.shape:
        raise ValueError(f"{pred.size} predictions for {y.size} targets")
    return pred, y


def smse(pred_mean, y_test, trivial: TrivialPredictor) -> float:
    """MSE of the predictions divided by the MSE of always predicting the training mean."""
    pred_mean, y_test = _pair(pred_mean, y_test)
    denom = float(np.mean((y_test - trivial.train_mean) ** 2))
    if denom == 0.0:
        raise ValueError("test targets all equal the training mean; SMSE is undefined")
    return float(np.mean((y_test - pred_mean) ** 2)) / denom


def neg_log_density(y, mean, var) -> np.ndarray:
    return 0.5 * (LOG_2PI + np.log(var)) + 0.5 * (y - mean) ** 2 / var


def msll(pred_mean, pred_var, y_test, trivial: TrivialPredictor) -> float:
    """Mean negative log predictive density minus that of the trivial model, in nats.

    ``pred_var`` must be the variance of the noisy observation, not of the
    latent function.
    """
    pred_mean, y_test = _pair(pred_mean, y_test)
    pred_var = np.asarray(pred_var, dtype=float).ravel()
    if pred_var.shape != y_test.shape:
        raise ValueError(f"{pred_var.size} variances for {y_test.size} targets")
    if not np.all(pred_var > 0):
        raise ValueError("predictive variances must be positive")
    if not trivial.train_variance > 0:
        raise ValueError("trivial model has zero variance")
    model = neg_log_density(y_test, pred_mean, pred_var)
    base = neg_log_density(y_test, trivial.train_mean, trivial.train_variance)
    return float(np.mean(model - base))
