"""A small benchmark grid through the harness, plus fixed vs learned.

Equivalent CLI:

    gpapprox run --config demos/configs/small_grid.json --out grid_out
    gpapprox run --compare --config demos/configs/small_grid.json --out compare_out

    python demos/05_experiment_grid.py
"""

from pathlib import Path

from gpapprox.harness import (
    ExperimentConfig,
    compare_fixed_vs_learned,
    curves,
    emit_results,
    run_experiment,
)

config = ExperimentConfig.load(Path(__file__).parent / "configs" / "small_grid.json")
report = run_experiment(config)
print(f"{len(report.cells)} cells, {len(report.failed)} failed")
print(f"{'method':<8}{'m':>6}{'hyper s':>10}{'train s':>10}{'test us/pt':>12}{'SMSE':>11}{'MSLL':>8}")
for row in curves(report):
    msll = "" if row["msll"] is None else f"{row['msll']:8.2f}"
    print(f"{row['method']:<8}{row['m']:>6}{row['hyper_seconds']:>10.3f}{row['train_seconds']:>10.4f}"
          f"{1e6 * row['test_seconds_per_point']:>12.2f}{row['smse']:>11.2e}{msll}")
print(emit_results(report, "grid_out"))

paired = compare_fixed_vs_learned(config)
for d in paired.deltas:
    if d["method"] == "sod" and d["run"] == 0:
        print(f"SoD m={d['m']:<5} learned-minus-fixed SMSE {d['smse_delta']:+.2e}")
