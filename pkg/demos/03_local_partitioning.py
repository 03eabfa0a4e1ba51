"""Local GPR on recursive projection clusters.

Builds the RPC tree, shows the balanced leaf sizes, and compares joint
(one shared set of hyperparameters) against separate (per-leaf)
training. Predictions jump across cluster boundaries; the last lines
print a pair of nearby test points straddling the root split.

    python demos/03_local_partitioning.py
"""

import numpy as np

from gpapprox import build_rpc, local_logml_joint, local_predict, local_train, rpc_assign
from gpapprox.data import SyntheticSpec, generate_synthetic
from gpapprox.local import leaf_objective
from gpapprox.metrics import TrivialPredictor, smse
from gpapprox.optimizer import OptBudget, default_hyperparameters, maximize_logml

ds = generate_synthetic(SyntheticSpec(2, 2000, 500, noise_variance=1e-4, seed=3))
X, y = ds.X_train, ds.y_train
trivial = TrivialPredictor.from_targets(y)
tree = build_rpc(X, 256, seed=0)
print("leaf sizes:", sorted(len(leaf) for leaf in tree.leaves), "depth", tree.depth())

theta0 = default_hyperparameters(X, y)
budget = OptBudget(max_evals=40)
joint = maximize_logml(lambda hp: local_logml_joint(X, y, tree, hp), theta0, budget).theta
sep = [maximize_logml(leaf_objective(X, y, tree, k), theta0, budget).theta
       for k in range(tree.n_leaves)]
for label, hp, mode in (("joint", joint, "joint"), ("separate", sep, "separate")):
    model = local_train(X, y, 256, hp, mode=mode, tree=tree)
    pred = local_predict(model, ds.X_test)
    print(f"{label:<9} SMSE {smse(pred.mean, ds.y_test, trivial):.2e}")

model = local_train(X, y, 256, joint, tree=tree)
root = tree.root
direction = root.pivot_b - root.pivot_a
# a point on the root's split hyperplane, nudged to either side
x0 = root.pivot_a + direction * root.threshold / float(direction @ direction)
pair = np.vstack([x0 - 1e-9 * direction, x0 + 1e-9 * direction])
print("leaves", rpc_assign(tree, pair), "means", local_predict(model, pair).mean)
