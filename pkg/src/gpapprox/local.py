"""Local GPR: independent exact GPs on the leaves of an RPC tree."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .exact import PredictiveDistribution, _check_xy, exact_logml, exact_predict, exact_train
from .kernel import Hyperparameters, _as_2d
from .selection import RpcTree, build_rpc, rpc_assign

MODES = ("joint", "separate")


class LeafError(RuntimeError):
    def __init__(self, leaf: int, cause: Exception):
        self.leaf = leaf
        super().__init__(f"leaf {leaf}: {cause}")


@dataclass
class LocalModel:
    tree: RpcTree
    models: list
    mode: str
    hps: list
    selection_seconds: float = 0.0
    timings: dict = field(default_factory=dict)

    @property
    def n_leaves(self) -> int:
        return len(self.models)


def _leaf_hps(tree: RpcTree, hp, mode: str) -> list:
    if isinstance(hp, Hyperparameters):
        return [hp] * tree.n_leaves
    hps = list(hp)
    if len(hps) != tree.n_leaves:
        raise ValueError(f"{len(hps)} hyperparameter sets for {tree.n_leaves} leaves")
    if mode == "joint" and any(h != hps[0] for h in hps):
        raise ValueError("joint mode requires identical hyperparameters in every leaf")
    return hps


def local_train(X, y, m: int, hp, seed: int = 0, mode: str = "joint",
                tree: RpcTree | None = None) -> LocalModel:
    """Partition with RPC (unless ``tree`` is given) and fit exact GPR per leaf.

    ``hp`` is one Hyperparameters shared by all leaves, or a sequence with
    one entry per leaf (separate mode).
    """
    if mode not in MODES:
        raise ValueError(f"unknown training mode {mode!r}")
    X, y = _check_xy(X, y)
    sel_time = 0.0
    if tree is None:
        t0 = time.perf_counter()
        tree = build_rpc(X, m, seed)
        sel_time = time.perf_counter() - t0
    hps = _leaf_hps(tree, hp, mode)
    models = []
    for leaf, (idx, h) in enumerate(zip(tree.leaves, hps)):
        try:
            models.append(exact_train(X[idx], y[idx], h))
        except Exception as exc:
            raise LeafError(leaf, exc) from exc
    return LocalModel(tree, models, mode, hps, sel_time)


def local_predict(model: LocalModel, Xstar) -> PredictiveDistribution:
    """Answer every test point with the single leaf it descends to (no blending)."""
    Xstar = _as_2d(Xstar)
    leaf_of = np.atleast_1d(rpc_assign(model.tree, Xstar))
    t = Xstar.shape[0]
    mean = np.empty(t)
    lat = np.empty(t)
    obs = np.empty(t)
    for leaf in np.unique(leaf_of):
        rows = np.flatnonzero(leaf_of == leaf)
        p = exact_predict(model.models[leaf], Xstar[rows])
        mean[rows] = p.mean
        lat[rows] = p.latent_variance
        obs[rows] = p.observation_variance
    return PredictiveDistribution(mean, lat, obs)


def local_logml_joint(X, y, tree: RpcTree, hp: Hyperparameters):
    """Sum of per-leaf log marginal likelihoods and gradients under shared hyperparameters."""
    X, y = _check_xy(X, y)
    total = 0.0
    grad = np.zeros(hp.n_params)
    for leaf, idx in enumerate(tree.leaves):
        try:
            L, g = exact_logml(X[idx], y[idx], hp)
        except Exception as exc:
            raise LeafError(leaf, exc) from exc
        total += L
        grad += g
    return total, grad


def local_logml_separate(X, y, tree: RpcTree, hps) -> list:
    X, y = _check_xy(X, y)
    hps = _leaf_hps(tree, hps, "separate")
    out = []
    for leaf, (idx, h) in enumerate(zip(tree.leaves, hps)):
        try:
            out.append(exact_logml(X[idx], y[idx], h))
        except Exception as exc:
            raise LeafError(leaf, exc) from exc
    return out


def leaf_objective(X, y, tree: RpcTree, leaf: int):
    idx = tree.leaves[leaf]
    Xl, yl = _as_2d(X)[idx], np.asarray(y, dtype=float)[idx]
    return lambda hp: exact_logml(Xl, yl, hp)

