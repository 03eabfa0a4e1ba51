"""Exact GPR against Subset of Data on a small synth2-style problem.

Draws a 2-D function from a GP prior, fits the exact model, then fits SoD
on growing random and farthest-point subsets with the same (true)
hyperparameters. Prints SMSE and MSLL for each.

    python demos/01_exact_vs_subset.py
"""

import time

from gpapprox import exact_predict, exact_train, sod_predict, sod_train
from gpapprox.data import SyntheticSpec, generate_synthetic
from gpapprox.metrics import TrivialPredictor, msll, smse

spec = SyntheticSpec(input_dim=2, n_train=2000, n_test=1000, noise_variance=1e-6, seed=1)
ds = generate_synthetic(spec)
hp = spec.hyperparameters()  # isotropic, unit lengthscale: the generating values
trivial = TrivialPredictor.from_targets(ds.y_train)


def report(label, pred, seconds):
    s = smse(pred.mean, ds.y_test, trivial)
    l = msll(pred.mean, pred.observation_variance, ds.y_test, trivial)
    print(f"{label:<22} SMSE {s:9.2e}   MSLL {l:7.2f}   train {seconds:6.3f}s")


t0 = time.perf_counter()
full = exact_train(ds.X_train, ds.y_train, hp)
report(f"exact (n={ds.n_train})", exact_predict(full, ds.X_test), time.perf_counter() - t0)

for selector in ("random", "fpc"):
    for m in (32, 128, 512):
        t0 = time.perf_counter()
        model = sod_train(ds.X_train, ds.y_train, m, hp, selector=selector, seed=0)
        report(f"SoD {selector} m={m}", sod_predict(model, ds.X_test), time.perf_counter() - t0)
