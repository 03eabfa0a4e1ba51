"""Experiment driver: method x m x run grids with separately timed phases.

Every cell runs three phases, each on its own clock:

1. hyperparameter learning: the optimizer on the method's own
   approximate log marginal likelihood (skipped with fixed hyperparameters),
2. training: the final fit at the chosen hyperparameters,
3. testing: batch prediction over the test set, variances included.

Subset selection / partitioning happens before phase 1 and is timed on
its own; reports carry training time with and without it.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import data as datamod
from .exact import exact_logml, exact_predict, exact_train
from .fitc import fitc_logml, fitc_predict, fitc_train
from .iterative import DenseKernelOperator, Termination, cg_solve, mean_from_alpha, preflight, smse_monitor
from .kernel import Hyperparameters
from .local import leaf_objective, local_logml_joint, local_predict, local_train
from .metrics import TrivialPredictor, msll, smse
from .optimizer import OptBudget, default_hyperparameters, maximize_logml
from .selection import build_rpc, choose_subset
from .sod import sod_logml, sod_train

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
METHODS = ("exact", "sod", "fitc", "hybrid", "local", "cg")

# Default m grids (powers of two), capped at n/2 when the data set is small.
DEFAULT_GRIDS = {
    "sod": (32, 4096),
    "fitc": (8, 512),
    "hybrid": (8, 1024),
    "local": (16, 2048),
    "cg": (16, 1024),
}

RESULT_COLUMNS = [
    "method", "selector", "local_mode", "m", "run", "seed", "status", "reason",
    "hyper_seconds", "selection_seconds", "train_seconds", "train_seconds_with_selection",
    "test_seconds", "test_seconds_per_point", "smse", "msll", "logml", "n_evals",
    "cg_iterations", "cg_residual", "theta",
]

CURVE_COLUMNS = [
    "method", "selector", "local_mode", "m", "runs", "ok", "hyper_seconds", "train_seconds",
    "train_seconds_with_selection", "test_seconds_per_point", "smse", "smse_median", "msll",
]


class ConfigError(ValueError):
    pass


def power_grid(lo: int, hi: int) -> list[int]:
    out, m = [], lo
    while m <= hi:
        out.append(m)
        m *= 2
    return out


@dataclass
class MethodSpec:
    method: str
    m: list | None = None
    selector: str = "random"
    local_mode: str = "joint"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method == "local":
            if self.selector in ("random", None):
                self.selector = "rpc"
            if self.selector != "rpc":
                raise ConfigError("local GPR partitions with rpc only")
            if self.local_mode not in ("joint", "separate"):
                raise ConfigError(f"unknown local mode {self.local_mode!r}")
        elif self.method in ("sod", "fitc", "hybrid"):
            if self.selector not in ("random", "fpc"):
                raise ConfigError(f"{self.method} needs selector random or fpc, not {self.selector!r}")
        else:
            self.selector = "none"
        if self.m is not None:
            self.m = [int(v) for v in np.atleast_1d(self.m)]

    def grid(self, n: int) -> list[int]:
        if self.method == "exact":
            return [n]
        if self.m is not None:
            return list(self.m)
        lo, hi = DEFAULT_GRIDS[self.method]
        if self.method != "cg":
            hi = min(hi, max(n // 2, 1))
        return power_grid(lo, hi) or [min(lo, n)]


@dataclass
class ExperimentConfig:
    """Grid definition. ``dataset`` is ``{"synthetic": {...}}`` or ``{"train": path, "test": path}``.

    ``theta`` is used in fixed mode: a hyperparameter dict, or
    ``"generative"`` for synthetic data.
    """

    dataset: dict
    methods: list
    hyper_mode: str = "learn"
    theta: object = "generative"
    runs: int = 5
    seed: int = 0
    optimizer: OptBudget = field(default_factory=OptBudget)
    ard: bool = True
    standardize: bool | None = None
    cg_rtol: float | None = None
    blas_threads: int | None = None
    schema: int = SCHEMA_VERSION
    base_dir: str | None = None

    def __post_init__(self):
        if self.schema != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema {self.schema}")
        if self.hyper_mode not in ("learn", "fixed"):
            raise ConfigError(f"hyper_mode must be learn or fixed, not {self.hyper_mode!r}")
        self.methods = [m if isinstance(m, MethodSpec) else MethodSpec(**m) for m in self.methods]
        if isinstance(self.optimizer, dict):
            self.optimizer = OptBudget(**self.optimizer)
        if self.runs < 1:
            raise ConfigError("runs must be at least 1")
        if not ("synthetic" in self.dataset or "train" in self.dataset):
            raise ConfigError("dataset needs a 'synthetic' spec or a 'train' path")

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "ExperimentConfig":
        d = dict(d)
        if "schema" not in d:
            raise ConfigError("config is missing the 'schema' field")
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if base_dir is not None and d.get("base_dir") is None:
            d["base_dir"] = str(base_dir)
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        with open(path) as fh:
            return cls.from_dict(json.load(fh), base_dir=path.parent)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = [asdict(m) for m in self.methods]
        d["optimizer"] = asdict(self.optimizer)
        if isinstance(self.theta, Hyperparameters):
            d["theta"] = self.theta.to_dict()
        return d


@dataclass
class CellResult:
    method: str
    selector: str
    local_mode: str
    m: int
    run: int
    seed: int
    status: str = "ok"
    reason: str = ""
    hyper_seconds: float = 0.0
    selection_seconds: float = 0.0
    train_seconds: float = 0.0
    train_seconds_with_selection: float = 0.0
    test_seconds: float = 0.0
    test_seconds_per_point: float = 0.0
    smse: float | None = None
    msll: float | None = None
    logml: float | None = None
    n_evals: int = 0
    cg_iterations: int | None = None
    cg_residual: float | None = None
    theta: object = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def key(self):
        return (self.method, self.selector, self.local_mode, self.m, self.run)


@dataclass
class ExperimentReport:
    config: dict
    dataset: dict
    cells: list = field(default_factory=list)

    @property
    def failed(self) -> list:
        return [c for c in self.cells if not c.ok]

    def to_dict(self) -> dict:
        return {"schema": SCHEMA_VERSION, "config": self.config, "dataset": self.dataset,
                "cells": [asdict(c) for c in self.cells]}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(d["config"], d["dataset"], [CellResult(**c) for c in d["cells"]])

    def select(self, **criteria) -> list:
        return [c for c in self.cells if all(getattr(c, k) == v for k, v in criteria.items())]


def load_dataset(config: ExperimentConfig) -> datamod.Dataset:
    spec = config.dataset
    if "synthetic" in spec:
        ds = datamod.generate_synthetic(datamod.SyntheticSpec(**spec["synthetic"]))
        standardize = bool(config.standardize)
    else:
        base = Path(config.base_dir) if config.base_dir else Path(".")
        train = base / spec["train"]
        test = base / spec["test"] if spec.get("test") else None
        ds = datamod.load_csv(train, test, name=spec.get("name"))
        standardize = True if config.standardize is None else config.standardize
    if standardize:
        ds = datamod.standardize(ds)
    return ds


def generative_hyperparameters(ds: datamod.Dataset, ard: bool) -> Hyperparameters:
    """True generating hyperparameters expressed in the dataset's (possibly standardized) inputs."""
    syn = ds.meta.get("synthetic")
    if syn is None:
        raise ConfigError("generative hyperparameters exist only for synthetic data")
    spec = datamod.SyntheticSpec(**syn)
    hp = spec.hyperparameters(ard=True)
    if ds.standardization is not None:
        hp = Hyperparameters(hp.log_lengthscales - np.log(ds.standardization.input_std),
                             hp.log_signal_std, hp.log_noise_std)
    if not ard:
        if ds.standardization is not None:
            raise ConfigError("isotropic generative hyperparameters need unstandardized inputs")
        hp = Hyperparameters(hp.log_lengthscales[:1], hp.log_signal_std, hp.log_noise_std)
    return hp


def fixed_hyperparameters(config: ExperimentConfig, ds: datamod.Dataset) -> Hyperparameters:
    th = config.theta
    if isinstance(th, Hyperparameters):
        return th
    if th == "generative":
        return generative_hyperparameters(ds, config.ard)
    if isinstance(th, dict):
        return Hyperparameters.from_dict(th)
    raise ConfigError(f"cannot interpret fixed hyperparameters {th!r}")


def _theta_out(theta):
    if isinstance(theta, Hyperparameters):
        return theta.to_dict()
    if isinstance(theta, list):
        return [t.to_dict() for t in theta]
    return theta


def run_cell(ds: datamod.Dataset, spec: MethodSpec, m: int, run: int,
             config: ExperimentConfig) -> CellResult:
    seed = config.seed + run
    cell = CellResult(spec.method, spec.selector, spec.local_mode if spec.method == "local" else "",
                      int(m), run, seed)
    try:
        _run_cell(ds, spec, int(m), seed, config, cell)
    except Exception as exc:  # noqa: BLE001 - a failed cell must not abort the grid
        log.warning("cell %s m=%s run=%s failed: %s", spec.method, m, run, exc)
        cell.status = "failed"
        cell.reason = f"{type(exc).__name__}: {exc}"
    return cell


def _run_cell(ds, spec, m, seed, config, cell):
    X, y, Xs, ys = ds.X_train, ds.y_train, ds.X_test, ds.y_test
    n = X.shape[0]
    if m < 1 or (spec.method != "cg" and m > n):
        raise ConfigError(f"m={m} outside [1, {n}]")
    learn = config.hyper_mode == "learn"
    theta0 = default_hyperparameters(X, y, ard=config.ard) if learn else fixed_hyperparameters(config, ds)
    trivial = TrivialPredictor.from_targets(y)
    budget = config.optimizer
    method = spec.method
    clock = time.perf_counter

    # selection / partitioning
    t0 = clock()
    subset = tree = None
    if method in ("sod", "fitc", "hybrid"):
        subset = choose_subset(X, m, spec.selector, seed)
    elif method == "local":
        tree = build_rpc(X, m, seed)
    cell.selection_seconds = clock() - t0

    # hyperparameter learning
    theta = theta0
    opt = None
    t0 = clock()
    if learn:
        if method in ("sod", "hybrid"):
            opt = maximize_logml(lambda hp: sod_logml(X, y, m, hp, subset=subset), theta0, budget)
        elif method == "fitc":
            opt = maximize_logml(lambda hp: fitc_logml(X, y, m, hp, subset=subset), theta0, budget)
        elif method == "exact":
            opt = maximize_logml(lambda hp: exact_logml(X, y, hp), theta0, budget)
        elif method == "local" and spec.local_mode == "joint":
            opt = maximize_logml(lambda hp: local_logml_joint(X, y, tree, hp), theta0, budget)
        elif method == "local":
            opts = [maximize_logml(leaf_objective(X, y, tree, k), theta0, budget)
                    for k in range(tree.n_leaves)]
            theta = [o.theta for o in opts]
            cell.n_evals = sum(o.n_evals for o in opts)
            cell.logml = float(sum(o.logml for o in opts))
        else:
            raise ConfigError("cg supports fixed hyperparameters only")
        if opt is not None:
            theta = opt.theta
            cell.n_evals = opt.n_evals
            cell.logml = opt.logml
    cell.hyper_seconds = clock() - t0
    cell.theta = _theta_out(theta)

    # training
    t0 = clock()
    if method == "sod":
        model = sod_train(X, y, m, theta, subset=subset)
    elif method in ("fitc", "hybrid"):
        model = fitc_train(X, y, m, theta, subset=subset)
    elif method == "exact":
        model = exact_train(X, y, theta)
    elif method == "local":
        model = local_train(X, y, m, theta, mode=spec.local_mode, tree=tree)
    else:
        op = DenseKernelOperator(X, theta)
        alpha, trace = cg_solve(op, y, Termination(max_iter=m, rtol=config.cg_rtol))
    cell.train_seconds = clock() - t0
    cell.train_seconds_with_selection = cell.train_seconds + cell.selection_seconds
    if method == "cg":
        cell.cg_iterations = trace.iterations[-1]
        cell.cg_residual = trace.residuals[-1]

    # testing
    t0 = clock()
    if method == "sod":
        pred = exact_predict(model.inner, Xs)
    elif method in ("fitc", "hybrid"):
        pred = fitc_predict(model, Xs)
    elif method == "exact":
        pred = exact_predict(model, Xs)
    elif method == "local":
        pred = local_predict(model, Xs)
    else:
        mean = mean_from_alpha(X, theta, alpha, Xs)
    cell.test_seconds = clock() - t0
    cell.test_seconds_per_point = cell.test_seconds / max(Xs.shape[0], 1)

    if Xs.shape[0]:
        if method == "cg":
            cell.smse = smse(mean, ys, trivial)
        else:
            cell.smse = smse(pred.mean, ys, trivial)
            cell.msll = msll(pred.mean, pred.observation_variance, ys, trivial)


def _blas_limit(threads):
    if threads is None:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=threads)


def _cell_job(args):
    ds, spec, m, run, config = args
    with _blas_limit(config.blas_threads):
        return run_cell(ds, spec, m, run, config)


def run_experiment(config: ExperimentConfig, dataset: datamod.Dataset | None = None,
                   jobs: int = 1) -> ExperimentReport:
    """Execute the whole grid; failed cells are recorded, never raised."""
    ds = load_dataset(config) if dataset is None else dataset
    jobs_list = []
    for spec in config.methods:
        for m in spec.grid(ds.n_train):
            for run in range(config.runs):
                jobs_list.append((ds, spec, m, run, config))
    if jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_cell_job, jobs_list))
    else:
        cells = [_cell_job(j) for j in jobs_list]
    return ExperimentReport(config.to_dict(), ds.manifest(), cells)


def _fmt(v):
    # absent values (no MSLL for cg, no failure reason, ...) are written as NA
    if v is None or v == "":
        return "NA"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (dict, list)):
        return json.dumps(v)
    return str(v)


def write_rows(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])


def _mean(vals):
    vals = [v for v in vals if v is not None and not (isinstance(v, float) and math.isnan(v))]
    return statistics.fmean(vals) if vals else None


def curves(report: ExperimentReport) -> list[dict]:
    """Per-(method, selector, mode, m) means over successful runs, in grid order."""
    groups: dict = {}
    for c in report.cells:
        groups.setdefault((c.method, c.selector, c.local_mode, c.m), []).append(c)
    rows = []
    for (method, selector, mode, m), cells in groups.items():
        ok = [c for c in cells if c.ok]
        smses = [c.smse for c in ok if c.smse is not None]
        rows.append({
            "method": method, "selector": selector, "local_mode": mode, "m": m,
            "runs": len(cells), "ok": len(ok),
            "hyper_seconds": _mean([c.hyper_seconds for c in ok]),
            "train_seconds": _mean([c.train_seconds for c in ok]),
            "train_seconds_with_selection": _mean([c.train_seconds_with_selection for c in ok]),
            "test_seconds_per_point": _mean([c.test_seconds_per_point for c in ok]),
            "smse": _mean(smses),
            "smse_median": statistics.median(smses) if smses else None,
            "msll": _mean([c.msll for c in ok]),
        })
    return rows


def emit_results(report: ExperimentReport, out_dir, formats=("csv", "json")) -> dict:
    """Write ``results.csv`` (one row per cell), ``results.json`` and ``curves.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    if "csv" in formats:
        paths["results_csv"] = out / "results.csv"
        write_rows(paths["results_csv"], RESULT_COLUMNS, [asdict(c) for c in report.cells])
        paths["curves_csv"] = out / "curves.csv"
        write_rows(paths["curves_csv"], CURVE_COLUMNS, curves(report))
    if "json" in formats:
        paths["results_json"] = out / "results.json"
        with open(paths["results_json"], "w") as fh:
            json.dump(report.to_dict(), fh, indent=1)
    return paths


def load_report(path) -> ExperimentReport:
    with open(path) as fh:
        return ExperimentReport.from_dict(json.load(fh))


@dataclass
class PairedReport:
    learned: ExperimentReport
    fixed: ExperimentReport
    deltas: list


def pair_deltas(learned: ExperimentReport, fixed: ExperimentReport) -> list[dict]:
    """Learned-minus-fixed SMSE/MSLL per matching cell."""
    by_key = {c.key(): c for c in fixed.cells}
    out = []
    for c in learned.cells:
        f = by_key.get(c.key())
        if f is None:
            continue
        row = {"method": c.method, "selector": c.selector, "local_mode": c.local_mode,
               "m": c.m, "run": c.run, "seed": c.seed,
               "smse_learned": c.smse, "smse_fixed": f.smse,
               "msll_learned": c.msll, "msll_fixed": f.msll,
               "smse_delta": None, "msll_delta": None}
        if c.ok and f.ok:
            if c.smse is not None and f.smse is not None:
                row["smse_delta"] = c.smse - f.smse
            if c.msll is not None and f.msll is not None:
                row["msll_delta"] = c.msll - f.msll
        out.append(row)
    return out


def compare_fixed_vs_learned(config: ExperimentConfig, dataset=None, jobs: int = 1) -> PairedReport:
    """Run the grid with learned and with generative hyperparameters on shared seeds."""
    ds = load_dataset(config) if dataset is None else dataset
    if "synthetic" not in ds.meta:
        raise ConfigError("fixed-vs-learned comparison needs a synthetic dataset")
    base = config.to_dict()
    base.pop("base_dir", None)
    learned_cfg = ExperimentConfig.from_dict({**base, "hyper_mode": "learn"}, config.base_dir)
    fixed_cfg = ExperimentConfig.from_dict({**base, "hyper_mode": "fixed", "theta": "generative"},
                                           config.base_dir)
    learned = run_experiment(learned_cfg, ds, jobs)
    fixed = run_experiment(fixed_cfg, ds, jobs)
    return PairedReport(learned, fixed, pair_deltas(learned, fixed))


DELTA_COLUMNS = ["method", "selector", "local_mode", "m", "run", "seed", "smse_learned",
                 "smse_fixed", "smse_delta", "msll_learned", "msll_fixed", "msll_delta"]


def emit_paired(paired: PairedReport, out_dir) -> dict:
    out = Path(out_dir)
    paths = {
        "learned": emit_results(paired.learned, out / "learned"),
        "fixed": emit_results(paired.fixed, out / "fixed"),
    }
    paths["deltas_csv"] = out / "deltas.csv"
    write_rows(paths["deltas_csv"], DELTA_COLUMNS, paired.deltas)
    return paths


@dataclass
class TraceResult:
    trace: object
    sod_reference: list
    hp: Hyperparameters
    alpha: np.ndarray


def run_cg_trace(ds: datamod.Dataset, hp: Hyperparameters, termination: Termination,
                 sod_reference=(), seed: int = 0, schedule=None) -> TraceResult:
    """CG on the full training set with test-SMSE monitoring, plus SoD reference points.

    The SoD references use the same fixed hyperparameters and a random
    subset; their time is the training (factorization) time.
    """
    X, y = ds.X_train, ds.y_train
    trivial = TrivialPredictor.from_targets(y)
    op = DenseKernelOperator(X, hp)
    preflight(op, seed=seed)
    monitor = smse_monitor(X, hp, ds.X_test, ds.y_test, trivial) if ds.n_test else None
    kwargs = {} if schedule is None else {"schedule": schedule}
    alpha, trace = cg_solve(op, y, termination, monitor=monitor, **kwargs)
    refs = []
    for m in sod_reference:
        m = int(m)
        if m > ds.n_train:
            continue
        subset = choose_subset(X, m, "random", seed)
        t0 = time.perf_counter()
        model = sod_train(X, y, m, hp, subset=subset)
        secs = time.perf_counter() - t0
        pred = exact_predict(model.inner, ds.X_test)
        refs.append({"m": m, "train_seconds": secs, "smse": smse(pred.mean, ds.y_test, trivial)})
    return TraceResult(trace, refs, hp, alpha)


def emit_trace(result: TraceResult, out_dir) -> dict:
    """``trace.csv``, ``sod_reference.csv`` and a merged ``error_vs_time.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"trace_csv": out / "trace.csv", "sod_csv": out / "sod_reference.csv",
             "error_vs_time_csv": out / "error_vs_time.csv"}
    result.trace.to_csv(paths["trace_csv"])
    write_rows(paths["sod_csv"], ["m", "train_seconds", "smse"], result.sod_reference)
    rows = [{"method": "cg", "control": it, "seconds": sec, "smse": None if math.isnan(err) else err,
             "residual": res}
            for it, res, sec, err in result.trace.rows()]
    rows += [{"method": "sod", "control": r["m"], "seconds": r["train_seconds"], "smse": r["smse"],
              "residual": None} for r in result.sod_reference]
    write_rows(paths["error_vs_time_csv"], ["method", "control", "seconds", "smse", "residual"], rows)
    return paths
