"""Command-line driver.

    semnet [run] pkm|ikm|baselines [options]   solve trials, write CSV + JSON report
    semnet sweep --axis mus|bss|alpha|tau ...  aggregate trend table (optional SVG)
    semnet validate [--quick]                  property suites

Output files (in ``--out``, default the current directory):
    runs.csv      trial_seed,n_mu,n_bs,alpha,tau,method,value,stm,fbar,iterations,stranded,feasible
    timings.csv   trial_seed,n_mu,n_bs,alpha,tau,method,runtime_s
    summary.csv / sweep.csv
                  axis,axis_value,method,trials,mean_value,mean_stm,mean_fbar,
                  mean_iterations,mean_stranded,feasible_fraction
    report_<method>.json, trace_<method>.csv, topology.csv   (first trial of ``run``)
    validate.csv  check,passed,detail

``run`` solves a single trial unless ``--trials`` is given; ``sweep`` uses
``experiment.trials`` (default 50). ``value`` is the method's objective: STM
for pkm/wf/even and the confidence bound for ikm. Wall-clock times live only
in timings.csv and the JSON report, so every other file is byte-identical
across repeated runs with the same seed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .config import ScenarioConfig, load_config
from .topology import ConfigError

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2
RUN_METHODS = {"pkm": ("pkm",), "ikm": ("ikm",), "baselines": ("wf", "even")}


def _common(p):
    p.add_argument("--config", type=Path, help="scenario file (.json or .toml)")
    p.add_argument("--seed", type=int, help="base seed (overrides experiment.seed)")
    p.add_argument("--trials", type=int, help="trials per point (overrides experiment.trials)")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semnet", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in RUN_METHODS:
        p = sub.add_parser(name, help=f"solve with {name}")
        _common(p)
        p.add_argument("--alpha", type=float, help="confidence level for ikm")
        p.add_argument("--tau", type=float, help="uniform matching degree")
        p.add_argument("--mus", type=int, help="number of MUs")
        p.add_argument("--bss", type=int, help="number of BSs (1 macro, rest pico:femto 1:2)")
    p = sub.add_parser("sweep", help="vary one axis and aggregate")
    _common(p)
    p.add_argument("--axis", choices=ex.AXES, required=True)
    p.add_argument("--from", dest="start", type=float)
    p.add_argument("--to", dest="stop", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--values", help="comma-separated axis values")
    p.add_argument("--methods", help="comma-separated subset of " + ",".join(ex.METHODS))
    p.add_argument("--tau", type=float, help="uniform matching degree")
    p.add_argument("--plots", action="store_true", help="also write sweep.svg")
    p = sub.add_parser("validate", help="run the property suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quick", action="store_true", help="smaller sample counts")
    p.add_argument("--out", type=Path, default=Path("."))
    return ap


def _scenario(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("--trials must be >= 1")
        kw["trials"] = args.trials
    if args.workers is not None:
        kw["workers"] = max(1, args.workers)
    if getattr(args, "tau", None) is not None:
        if not 0 <= args.tau <= 1:
            raise ConfigError("--tau must lie in [0, 1]")
        kw["tau"] = args.tau
    return cfg.replace(**kw)


def _axis_values(args):
    if args.values:
        vals = [float(v) for v in args.values.split(",") if v.strip()]
    elif args.start is not None or args.stop is not None:
        if args.start is None or args.stop is None:
            raise ConfigError("--from and --to go together")
        step = args.step if args.step else (args.stop - args.start)
        if step <= 0:
            raise ConfigError("--step must be positive")
        count = int(np.floor((args.stop - args.start) / step + 1e-9)) + 1
        vals = [args.start + k * step for k in range(count)]
    else:
        vals = ex.DEFAULT_AXIS_VALUES[args.axis]
    if args.axis in ("mus", "bss"):
        vals = [int(round(v)) for v in vals]
    if not vals:
        raise ConfigError("empty axis")
    return vals


def _write(out: Path, name: str, text: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def cmd_run(args) -> int:
    # a plain run is a single trial unless --trials asks for more
    cfg = _scenario(args)
    if args.trials is None:
        cfg = cfg.replace(trials=1)
    methods = RUN_METHODS[args.command]
    if args.alpha is not None and not 0.5 < args.alpha < 1:
        raise ConfigError("--alpha must lie in (0.5, 1)")
    specs = [ex.TrialSpec(seed=s, method=m, n_users=args.mus, n_bs=args.bss, alpha=args.alpha)
             for m in methods for s in ex.trial_seeds(cfg)]
    rows = ex.run_trials(cfg, specs)
    # the first trial of each method is re-solved to keep its full report
    first = [ex.run_trial(cfg, specs[k * cfg.trials], keep_solution=True)
             for k in range(len(methods))]
    _write(args.out, "runs.csv", ex.rows_to_csv(rows, ex.TRIAL_FIELDS))
    _write(args.out, "timings.csv", ex.rows_to_csv(rows, ex.TIMING_FIELDS))
    summary = ex.aggregate(specs, rows, "run", [None], methods)
    _write(args.out, "summary.csv", ex.rows_to_csv(summary, ex.AGGREGATE_FIELDS))
    for row in first:
        rep = row["_report"]
        _write(args.out, f"report_{row['method']}.json", rep.to_json(indent=2) + "\n")
        _write(args.out, f"trace_{row['method']}.csv", rep.trace_csv())
    inst = first[0]["_instance"]
    if inst.topology is not None:
        _write(args.out, "topology.csv", inst.topology.to_csv())
    for r in summary:
        extra = f", mean fbar {r['mean_fbar']:.6g}" if r["mean_fbar"] != "" else ""
        print(f"{r['method']}: {r['trials']} trial(s), mean objective {r['mean_value']:.6g}, "
              f"mean STM {r['mean_stm']:.6g}{extra}, mean stranded {r['mean_stranded']:g}")
    bad = [r for r in rows if not r["feasible"]]
    if bad:
        print(f"warning: {len(bad)} trial(s) returned assignments with violations", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _scenario(args)
    values = _axis_values(args)
    methods = (tuple(m.strip() for m in args.methods.split(",") if m.strip()) if args.methods
               else ex.DEFAULT_AXIS_METHODS[args.axis])
    unknown = [m for m in methods if m not in ex.METHODS]
    if unknown:
        raise ConfigError(f"unknown methods {unknown}; choose from {', '.join(ex.METHODS)}")
    if args.axis == "alpha" and any(not 0.5 < v < 1 for v in values):
        raise ConfigError("alpha values must lie in (0.5, 1)")
    if args.axis == "tau" and any(not 0 <= v <= 1 for v in values):
        raise ConfigError("tau values must lie in [0, 1]")
    specs = ex.sweep_specs(cfg, args.axis, values, methods)
    rows = ex.run_trials(cfg, specs)
    agg = ex.aggregate(specs, rows, args.axis, values, methods)
    _write(args.out, "sweep_trials.csv", ex.rows_to_csv(rows, ex.TRIAL_FIELDS))
    _write(args.out, "timings.csv", ex.rows_to_csv(rows, ex.TIMING_FIELDS))
    _write(args.out, "sweep.csv", ex.rows_to_csv(agg, ex.AGGREGATE_FIELDS))
    if args.plots:
        ex.plot_sweep(agg, args.axis, args.out / "sweep.svg")
    for r in agg:
        print(f"{args.axis}={r['axis_value']} {r['method']}: mean objective {r['mean_value']:.6g}")
    return EXIT_OK


def cmd_validate(args) -> int:
    from .validation import run_all

    results = run_all(quick=args.quick, seed=args.seed)
    rows = [{"check": r.name, "passed": int(r.passed), "detail": r.detail} for r in results]
    _write(args.out, "validate.csv", ex.rows_to_csv(rows, ["check", "passed", "detail"]))
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv[:1] == ["run"]:
        argv = argv[1:]
    args = build_parser().parse_args(argv)
    handler = {"sweep": cmd_sweep, "validate": cmd_validate}.get(args.command, cmd_run)
    try:
        return handler(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
