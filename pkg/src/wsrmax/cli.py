"""
Command-line entry point.

Subcommands::

    run                    run every configured solver on every seed
    verify                 run the identity suite, one JSON line per check
    sweep                  WSR-MM vs WSR-MM+ convergence time along an axis
    relaxed-bisection      WSR-MM with coarse multiplier searches
    print-default-config   emit the default configuration as JSON

Exit status is 0 on success, 1 when a solver or identity check fails and 2
on usage errors.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys

from . import bench, equivalence
from .calculus import EtaMode

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _common(p, config=True):
    if config:
        p.add_argument("--config", help="experiment config (JSON)")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--seeds", type=int,
                   help="use seeds 0..n-1 instead of the configured ones")
    p.add_argument("--parallel", action="store_true",
                   help="run seeds in worker processes")
    p.add_argument("--eta-mode", choices=[m.value for m in EtaMode])


def build_parser():
    ap = argparse.ArgumentParser(
        prog="wsrmax", description="Weighted sum-rate beamforming solvers.")
    sub = ap.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("run", help="run solvers over seeds"))
    v = sub.add_parser("verify", help="run the identity suite")
    v.add_argument("--seeds", type=int, default=100)
    v.add_argument("--users", type=int, default=4)
    v.add_argument("--dims", type=int, default=4)
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--force-failure", action="store_true",
                   help="perturb one auxiliary map by 1e-3")
    v.add_argument("--out", help="also write the JSON lines here")
    s = sub.add_parser("sweep", help="convergence time along an axis")
    _common(s)
    s.add_argument("--axis", choices=sorted(bench.SWEEP_AXES), required=True)
    s.add_argument("--values", type=int, nargs="+", required=True)
    r = sub.add_parser("relaxed-bisection", help="coarse multiplier search")
    _common(r)
    r.add_argument("--thresholds", type=int, nargs="*", default=[2, 60],
                   help="exponents i of the width 2^-i")
    sub.add_parser("print-default-config",
                   help="print the default config as JSON")
    return ap


def _usage(msg):
    print(f"wsrmax: error: {msg}", file=sys.stderr)
    return EXIT_USAGE


def _config(args):
    cfg = bench.load_config(args.config) if getattr(args, "config", None) \
        else bench.default_config()
    changes = {}
    if args.out:
        changes["out_dir"] = args.out
    if args.seeds is not None:
        if args.seeds < 1:
            raise bench.ConfigError("--seeds", "must be at least 1")
        changes["seeds"] = tuple(range(args.seeds))
    if args.eta_mode:
        changes["eta_mode"] = EtaMode(args.eta_mode)
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def cmd_run(args):
    cfg = _config(args)
    records = bench.run_experiment(cfg, args.parallel)
    os.makedirs(cfg.out_dir, exist_ok=True)
    bench.write_trajectories(records, cfg.out_dir)
    agg = bench.aggregate(records)
    _dump({"config": cfg.to_dict(), "solvers": agg},
          os.path.join(cfg.out_dir, "aggregate.json"))
    failed = [(r.seed, r.spec.label, r.traj.error) for r in records
              if r.traj.error is not None]
    for label, a in agg.items():
        print(f"{label:28s} mean final WSR {a.get('mean_final_wsr', 'n/a')}"
              f"  mean iters {a.get('mean_iterations', 'n/a')}")
    for seed, label, err in failed:
        print(f"FAILED seed={seed} solver={label}: {err}", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_verify(args):
    if args.seeds < 1:
        return _usage("--seeds must be at least 1")
    try:
        reports = list(equivalence.run_suite(
            range(args.seeds), args.users, args.dims,
            perturb=1e-3 if args.force_failure else 0.0, trials=args.trials))
    except ValueError as exc:
        return _usage(str(exc))
    lines = [r.to_json() for r in reports]
    for line in lines:
        print(line)
    if args.out:
        os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
        with open(args.out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    bad = [r for r in reports if not r.passed]
    for r in bad:
        print(f"FAILED {r.identity} seed={r.instance.get('seed')} "
              f"discrepancy={r.discrepancy:.3e} tol={r.tolerance:.0e}",
              file=sys.stderr)
    return EXIT_FAIL if bad else EXIT_OK


def cmd_sweep(args):
    cfg = _config(args)
    rows = bench.sweep(cfg, args.axis, args.values, args.parallel)
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, f"sweep_{args.axis}.csv")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    for r in rows:
        print(f"{r['axis']}={r['value']:<4d} {r['solver']:8s} "
              f"mean {r['mean_seconds']:.4f}s  iters {r['mean_iterations']:.1f}")
    return EXIT_FAIL if any(r["failures"] for r in rows) else EXIT_OK


def cmd_relaxed(args):
    cfg = _config(args)
    records, variants, summary = bench.relaxed_bisection(
        cfg, args.thresholds, args.parallel)
    os.makedirs(cfg.out_dir, exist_ok=True)
    bench.write_trajectories(records, cfg.out_dir, variants)
    _dump(summary, os.path.join(cfg.out_dir, "relaxed_bisection.json"))
    for i, s in summary.items():
        print(f"2^-{i}: affected {s['affected_fraction']:.2f} of seeds, "
              f"max |final gap| {s['max_abs_final_gap']:.3e}")
    failed = any(r.traj.error is not None for r in records)
    return EXIT_FAIL if failed else EXIT_OK


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "print-default-config":
        print(json.dumps(bench.default_config().to_dict(), indent=1,
                         sort_keys=True))
        return EXIT_OK
    handlers = {"run": cmd_run, "verify": cmd_verify, "sweep": cmd_sweep,
                "relaxed-bisection": cmd_relaxed}
    try:
        return handlers[args.command](args)
    except bench.ConfigError as exc:
        return _usage(str(exc))
    except FileNotFoundError as exc:
        return _usage(str(exc))


if __name__ == "__main__":
    sys.exit(main())
