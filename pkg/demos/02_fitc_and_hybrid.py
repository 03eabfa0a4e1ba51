"""FITC and Hybrid: using all n points through m inducing inputs.

Hyperparameters are learned three ways at the same m: by the SoD
likelihood on the subset (then SoD prediction), by the FITC likelihood
(then FITC prediction), and the Hybrid route (SoD likelihood, FITC
prediction). The learning time shows the O(m^3) vs O(m^2 n) gap.

    python demos/02_fitc_and_hybrid.py
"""

import time

from gpapprox import fitc_logml, fitc_predict, fitc_train, hybrid_train, sod_logml, sod_train
from gpapprox.data import SyntheticSpec, generate_synthetic
from gpapprox.metrics import TrivialPredictor, smse
from gpapprox.optimizer import OptBudget, default_hyperparameters, maximize_logml
from gpapprox.selection import choose_subset
from gpapprox.sod import sod_predict

ds = generate_synthetic(SyntheticSpec(2, 3000, 1000, noise_variance=1e-4, seed=2))
X, y = ds.X_train, ds.y_train
trivial = TrivialPredictor.from_targets(y)
budget = OptBudget(max_evals=60)
m = 64
subset = choose_subset(X, m, "random", seed=0)
theta0 = default_hyperparameters(X, y)

t0 = time.perf_counter()
opt = maximize_logml(lambda hp: sod_logml(X, y, m, hp, subset=subset), theta0, budget)
sod = sod_predict(sod_train(X, y, m, opt.theta, subset=subset), ds.X_test)
print(f"SoD     learn {time.perf_counter() - t0:6.2f}s  SMSE {smse(sod.mean, ds.y_test, trivial):.2e}")

t0 = time.perf_counter()
opt = maximize_logml(lambda hp: fitc_logml(X, y, m, hp, subset=subset), theta0, budget)
t_learn = time.perf_counter() - t0
fitc = fitc_predict(fitc_train(X, y, m, opt.theta, subset=subset), ds.X_test)
print(f"FITC    learn {t_learn:6.2f}s  SMSE {smse(fitc.mean, ds.y_test, trivial):.2e}")

model = hybrid_train(X, y, m, theta0, subset=subset, budget=budget)
hyb = fitc_predict(model, ds.X_test)
print(f"Hybrid  learn {model.timings['hyper_seconds']:6.2f}s  "
      f"SMSE {smse(hyb.mean, ds.y_test, trivial):.2e}")
