"""Conjugate gradients on the full system, traced against SoD.

Solves (K + noise I) alpha = y iteratively on a synth8-style problem with
the true hyperparameters, recording the relative residual and the test
SMSE of the intermediate mean predictor. SoD reference points show the
error reached in comparable time. CSVs land in ./cg_trace_out.

    python demos/04_cg_trace.py
"""

import math

from gpapprox.data import SyntheticSpec, generate_synthetic
from gpapprox.harness import emit_trace, run_cg_trace
from gpapprox.iterative import Termination

spec = SyntheticSpec(8, 2048, 1024, noise_variance=1e-3, seed=4)
ds = generate_synthetic(spec)
result = run_cg_trace(ds, spec.hyperparameters(), Termination(max_iter=300, rtol=1e-10),
                      sod_reference=[128, 256, 512, 1024])
tr = result.trace
for it, res, sec, err in tr.rows()[:12] + tr.rows()[-3:]:
    shown = "NA" if math.isnan(err) else f"{err:.4f}"
    print(f"iter {it:4d}  residual {res:9.2e}  {sec:7.4f}s  SMSE {shown}")
print("stop:", tr.stop_reason)
for r in result.sod_reference:
    print(f"SoD m={r['m']:5d}  {r['train_seconds']:7.4f}s  SMSE {r['smse']:.4f}")
print(emit_trace(result, "cg_trace_out"))
