"""Datasets: synthetic GP draws, CSV ingestion, and input standardization."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import linalg

from .exact import jitter_cholesky
from .kernel import Hyperparameters, kernel_matrix

# Above this many points the synthetic sampler switches to block-sequential conditioning.
JOINT_SAMPLE_LIMIT = 8000
SAMPLE_BLOCK = 4096


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    """Inputs ~ N(0, I); latent f ~ GP(0, isotropic SE); targets = f + N(0, noise_variance)."""

    input_dim: int
    n_train: int
    n_test: int
    lengthscale: float = 1.0
    signal_std: float = 1.0
    noise_variance: float = 0.0
    seed: int = 0
    name: str = "synthetic"

    def __post_init__(self):
        if self.input_dim < 1 or self.n_train < 1 or self.n_test < 0:
            raise ValueError("input_dim and n_train must be positive, n_test non-negative")
        if not (self.lengthscale > 0 and self.signal_std > 0):
            raise ValueError("lengthscale and signal_std must be positive")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be non-negative")

    def hyperparameters(self, ard: bool = False) -> Hyperparameters:
        """Generating hyperparameters (noise std floored at 1e-150 for zero noise)."""
        noise_std = math.sqrt(self.noise_variance) if self.noise_variance > 0 else 1e-150
        return Hyperparameters.create(
            self.lengthscale, self.signal_std, noise_std, dim=self.input_dim if ard else None
        )

    @classmethod
    def synth2(cls, n_train=30543, n_test=30544, seed=0):
        return cls(2, n_train, n_test, noise_variance=1e-6, seed=seed, name="synth2")

    @classmethod
    def synth8(cls, n_train=30543, n_test=30544, seed=0):
        return cls(8, n_train, n_test, noise_variance=1e-3, seed=seed, name="synth8")


@dataclass
class StandardizationRecord:
    input_mean: np.ndarray
    input_std: np.ndarray
    target_mean: float = 0.0
    targets_centered: bool = False
    constant_dims: list = field(default_factory=list)

    def to_dict(self):
        return {
            "input_mean": self.input_mean.tolist(),
            "input_std": self.input_std.tolist(),
            "target_mean": self.target_mean,
            "targets_centered": self.targets_centered,
            "constant_dims": list(self.constant_dims),
        }


@dataclass
class Dataset:
    name: str
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    standardization: StandardizationRecord | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X_train = np.atleast_2d(np.asarray(self.X_train, dtype=float))
        self.y_train = np.asarray(self.y_train, dtype=float).ravel()
        D = self.X_train.shape[1]
        self.X_test = np.asarray(self.X_test, dtype=float).reshape(-1, D)
        self.y_test = np.asarray(self.y_test, dtype=float).ravel()
        if self.X_train.shape[0] != self.y_train.shape[0]:
            raise ValueError("training inputs and targets differ in length")
        if self.X_test.shape[0] != self.y_test.shape[0]:
            raise ValueError("test inputs and targets differ in length")
        for arr in (self.X_train, self.y_train, self.X_test, self.y_test):
            if not np.all(np.isfinite(arr)):
                raise ValueError("dataset contains non-finite values")

    @property
    def dim(self) -> int:
        return self.X_train.shape[1]

    @property
    def n_train(self) -> int:
        return self.X_train.shape[0]

    @property
    def n_test(self) -> int:
        return self.X_test.shape[0]

    def manifest(self) -> dict:
        out = {"name": self.name, "D": self.dim, "n_train": self.n_train, "n_test": self.n_test}
        out.update(self.meta)
        if self.standardization is not None:
            out["standardization"] = self.standardization.to_dict()
        return out

    def save(self, directory) -> Path:
        """Write ``train.csv``, ``test.csv`` and ``manifest.json`` into ``directory``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        write_csv(directory / "train.csv", self.X_train, self.y_train)
        write_csv(directory / "test.csv", self.X_test, self.y_test)
        with open(directory / "manifest.json", "w") as fh:
            json.dump(self.manifest(), fh, indent=2)
        return directory


def _sample_gaussian(X: np.ndarray, hp: Hyperparameters, add_noise: bool, z: np.ndarray,
                     block: int = SAMPLE_BLOCK):
    """``L @ z`` with ``L`` the Cholesky factor of ``K(X, X) (+ noise I)``.

    Small problems factor the whole matrix; larger ones run a blocked
    left-looking factorization that produces each block of the sample as
    soon as its rows of ``L`` are known. Both are the same exact draw.
    Returns the sample and the largest jitter used.
    """
    N = X.shape[0]
    noise = hp.noise_variance if add_noise else 0.0
    if N <= JOINT_SAMPLE_LIMIT:
        A = kernel_matrix(X, None, hp)
        A[np.diag_indices_from(A)] += noise
        L, jitter = jitter_cholesky(A)
        return L @ z, jitter, "joint"
    starts = list(range(0, N, block))
    blocks = [slice(s, min(N, s + block)) for s in starts]
    Lrows: list[list[np.ndarray]] = []
    out = np.empty(N)
    max_jitter = 0.0
    for b, sb in enumerate(blocks):
        row = []
        for j in range(b):
            sj = blocks[j]
            Kbj = kernel_matrix(X[sb], X[sj], hp)
            for k in range(j):
                Kbj -= row[k] @ Lrows[j][k].T
            row.append(linalg.solve_triangular(Lrows[j][j], Kbj.T, lower=True).T)
        S = kernel_matrix(X[sb], None, hp)
        S[np.diag_indices_from(S)] += noise
        for Lbj in row:
            S -= Lbj @ Lbj.T
        S = 0.5 * (S + S.T)
        Lbb, jitter = jitter_cholesky(S)
        max_jitter = max(max_jitter, jitter)
        row.append(Lbb)
        Lrows.append(row)
        out[sb] = sum(row[j] @ z[blocks[j]] for j in range(b + 1))
    return out, max_jitter, "blocked"


def sample_gp(X, hp: Hyperparameters, rng, noisy: bool = True):
    """One draw at inputs ``X`` from the zero-mean GP, with noise added if ``noisy``.

    Without noise, duplicated input rows receive identical values. Returns
    ``(values, info)`` where ``info`` records the sampler used and jitter.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if noisy and hp.noise_variance > 0:
        z = rng.standard_normal(X.shape[0])
        y, jitter, mode = _sample_gaussian(X, hp, True, z)
    else:
        uniq, inverse = np.unique(X, axis=0, return_inverse=True)
        z = rng.standard_normal(uniq.shape[0])
        f, jitter, mode = _sample_gaussian(uniq, hp, False, z)
        y = f[np.ravel(inverse)]
    return y, {"sampler": mode, "sampler_jitter": jitter}


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Draw a synth2/synth8-style dataset. Test targets carry observation noise too."""
    rng = np.random.default_rng(spec.seed)
    N = spec.n_train + spec.n_test
    X = rng.standard_normal((N, spec.input_dim))
    y, info = sample_gp(X, spec.hyperparameters(), rng, noisy=spec.noise_variance > 0)
    meta = {
        "synthetic": asdict(spec),
        "noise_variance": spec.noise_variance,
        "seed": spec.seed,
        "test_targets_noisy": True,
        **info,
    }
    n = spec.n_train
    return Dataset(spec.name, X[:n], y[:n], X[n:], y[n:], None, meta)


def _parse_float(tok: str, path, lineno: int, col: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise DataFormatError(f"{path}:{lineno}: non-numeric cell {tok!r} in column {col + 1}") from None
    if not math.isfinite(v):
        raise DataFormatError(f"{path}:{lineno}: non-finite cell {tok!r} in column {col + 1}")
    return v


def _is_header(tokens) -> bool:
    for tok in tokens:
        try:
            float(tok)
        except ValueError:
            return True
    return False


def read_table(path):
    """Read a comma-separated numeric table whose last column is the target.

    A first line containing any non-numeric token is taken as a header.
    Returns ``(X, y)``.
    """
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, tokens in enumerate(csv.reader(fh), start=1):
            tokens = [t.strip() for t in tokens]
            if not tokens or all(t == "" for t in tokens):
                continue
            if width is None and not rows and _is_header(tokens):
                width = len(tokens)
                continue
            if width is None:
                width = len(tokens)
            if len(tokens) != width:
                raise DataFormatError(
                    f"{path}:{lineno}: expected {width} columns, found {len(tokens)}"
                )
            rows.append([_parse_float(t, path, lineno, c) for c, t in enumerate(tokens)])
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    if width < 2:
        raise DataFormatError(f"{path}: need at least one input column and a target column")
    table = np.array(rows, dtype=float)
    return table[:, :-1], table[:, -1]


def write_csv(path, X, y, header: bool = True) -> None:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow([f"x{d}" for d in range(X.shape[1])] + ["y"])
        for xi, yi in zip(X, y):
            w.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])


def load_csv(train_path, test_path=None, name: str | None = None) -> Dataset:
    """Load training (and optionally test) tables into a Dataset."""
    Xtr, ytr = read_table(train_path)
    if test_path is not None:
        Xte, yte = read_table(test_path)
        if Xte.shape[1] != Xtr.shape[1]:
            raise DataFormatError(
                f"{test_path}: {Xte.shape[1]} input columns, training file has {Xtr.shape[1]}"
            )
    else:
        Xte, yte = np.empty((0, Xtr.shape[1])), np.empty(0)
    name = name or Path(train_path).stem
    meta = {"train_path": str(train_path), "test_path": None if test_path is None else str(test_path)}
    return Dataset(name, Xtr, ytr, Xte, yte, None, meta)


def standardize(dataset: Dataset, center_targets: bool = True) -> Dataset:
    """Shift and scale each input dimension to zero mean / unit variance on the training data.

    The same transform is applied to the test inputs. Constant training
    dimensions keep scale 1 (and trigger a warning). Targets are
    optionally centred on the training mean.
    """
    Xtr = dataset.X_train
    mu = Xtr.mean(axis=0)
    sd = Xtr.std(axis=0)
    constant = [int(d) for d in np.flatnonzero(sd == 0)]
    if constant:
        warnings.warn(f"constant input dimensions {constant}; using scale 1", stacklevel=2)
        sd = np.where(sd == 0, 1.0, sd)
    ymu = float(dataset.y_train.mean()) if center_targets else 0.0
    rec = StandardizationRecord(mu, sd, ymu, center_targets, constant)
    return replace(
        dataset,
        X_train=(Xtr - mu) / sd,
        y_train=dataset.y_train - ymu,
        X_test=(dataset.X_test - mu) / sd,
        y_test=dataset.y_test - ymu,
        standardization=rec,
        meta=dict(dataset.meta),
    )
