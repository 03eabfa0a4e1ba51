"""Command-line driver: ``gen``, ``run``, ``curves`` and ``trace``.

Exit codes: 0 on success, 2 when a report was written but some cells
failed, 1 for configuration or input errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import data as datamod
from . import harness
from .iterative import Termination

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CELLS_FAILED = 2


def _read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _synthetic_from(args) -> datamod.SyntheticSpec:
    if args.config:
        cfg = _read_json(args.config)
        if "dataset" in cfg:
            cfg = cfg["dataset"]
        spec = dict(cfg.get("synthetic", cfg))
        spec.pop("schema", None)
    elif args.preset:
        spec = {"synth2": datamod.SyntheticSpec.synth2,
                "synth8": datamod.SyntheticSpec.synth8}[args.preset]().__dict__.copy()
    else:
        spec = {"input_dim": args.dim, "noise_variance": args.noise, "name": "synthetic"}
    for key, val in (("n_train", args.n_train), ("n_test", args.n_test),
                     ("input_dim", args.dim if args.config or args.preset else None)):
        if val is not None:
            spec[key] = val
    if args.seed is not None:
        spec["seed"] = args.seed
    if "n_train" not in spec or "n_test" not in spec:
        raise harness.ConfigError("gen needs --n-train and --n-test (or a config/preset)")
    return datamod.SyntheticSpec(**spec)


def cmd_gen(args) -> int:
    spec = _synthetic_from(args)
    ds = datamod.generate_synthetic(spec)
    out = ds.save(args.out)
    print(f"wrote {ds.n_train} training and {ds.n_test} test points (D={ds.dim}) to {out}")
    return EXIT_OK


def _load_config(args) -> harness.ExperimentConfig:
    config = harness.ExperimentConfig.load(args.config)
    if args.seed is not None:
        config.seed = args.seed
    return config


def cmd_run(args) -> int:
    config = _load_config(args)
    out = Path(args.out)
    if args.compare:
        paired = harness.compare_fixed_vs_learned(config, jobs=args.jobs)
        paths = harness.emit_paired(paired, out)
        failed = paired.learned.failed + paired.fixed.failed
        total = len(paired.learned.cells) + len(paired.fixed.cells)
    else:
        report = harness.run_experiment(config, jobs=args.jobs)
        paths = harness.emit_results(report, out)
        failed, total = report.failed, len(report.cells)
    print(f"{total} cells, {len(failed)} failed; results in {out}")
    for c in failed:
        print(f"  failed: {c.method} m={c.m} run={c.run}: {c.reason}", file=sys.stderr)
    logging.getLogger(__name__).debug("outputs: %s", paths)
    return EXIT_CELLS_FAILED if failed else EXIT_OK


def cmd_curves(args) -> int:
    src = Path(args.config)
    if src.is_dir():
        src = src / "results.json"
    report = harness.load_report(src)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    harness.write_rows(out / "curves.csv", harness.CURVE_COLUMNS, harness.curves(report))
    print(f"aggregated {len(report.cells)} cells into {out / 'curves.csv'}")
    return EXIT_OK


def cmd_trace(args) -> int:
    raw = _read_json(args.config)
    trace_opts = raw.pop("trace", {})
    config = harness.ExperimentConfig.from_dict(
        {"methods": [], "hyper_mode": "fixed", **raw}, base_dir=Path(args.config).parent)
    if args.seed is not None:
        config.seed = args.seed
    ds = harness.load_dataset(config)
    hp = harness.fixed_hyperparameters(config, ds)
    term = Termination(trace_opts.get("max_iter"), trace_opts.get("rtol"),
                       trace_opts.get("max_seconds"))
    if term.max_iter is None and term.rtol is None and term.max_seconds is None:
        term = Termination(max_iter=min(ds.n_train, 1000))
    result = harness.run_cg_trace(ds, hp, term, trace_opts.get("sod_reference", ()), seed=config.seed)
    paths = harness.emit_trace(result, args.out)
    tr = result.trace
    print(f"CG: {tr.iterations[-1]} iterations, relative residual {tr.residuals[-1]:.3e} "
          f"({tr.stop_reason}); wrote {paths['error_vs_time_csv']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gpapprox", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="JSON config path")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the base seed")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for grid cells")

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    common(g, config_required=False)
    g.add_argument("--preset", choices=["synth2", "synth8"])
    g.add_argument("--dim", type=int, default=None)
    g.add_argument("--n-train", type=int, default=None)
    g.add_argument("--n-test", type=int, default=None)
    g.add_argument("--noise", type=float, default=0.0, help="noise variance")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run an experiment grid from a JSON config")
    common(r)
    r.add_argument("--compare", action="store_true",
                   help="run learned and generative hyperparameters and emit paired deltas")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("curves", help="aggregate a results.json into curves.csv")
    common(c)
    c.set_defaults(func=cmd_curves)

    t = sub.add_parser("trace", help="CG residual/error trace with SoD reference points")
    common(t)
    t.set_defaults(func=cmd_trace)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "gen" and args.dim is None and not (args.config or args.preset):
        print("gen: give --config, --preset or --dim", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except (harness.ConfigError, datamod.DataFormatError, FileNotFoundError,
            json.JSONDecodeError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
