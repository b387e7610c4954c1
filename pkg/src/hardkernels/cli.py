"""Command-line interface: ``hardkernels {generate,run,sweep,verify,report}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness, verify
from .config import config_from_mapping, dump_config, load_config
from .instances import build_lowrank_instance, sample_hard_kernel, save_instance
from .learners import nystrom_gram

log = logging.getLogger("hardkernels")

CONFIG_FLAGS = ("loss", "regime", "norm_bound", "lam", "d", "m", "budget", "y", "learner",
                "trials", "seed", "sweep", "sweep_values")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value experiment file; flags below override it")
    p.add_argument("--loss", help="absolute | hinge | squared | linear")
    p.add_argument("--regime", help="norm (norm-ball constraint) | soft (lam-regularized)")
    p.add_argument("--norm-bound", dest="norm_bound", help="norm-ball radius (default 2)")
    p.add_argument("--lam", help="regularization strength for the soft regime")
    p.add_argument("--d", help="number of blocks: integer, budget, hinge or squared")
    p.add_argument("--m", help="number of examples: integer or auto (128 d)")
    p.add_argument("--budget", help="distinct kernel entries the learner may read")
    p.add_argument("--y", help="target: number, inv_sqrt_d or half_inv_lam_d")
    p.add_argument("--learner", help="subsample | nystrom | uniform_random_queries | "
                                     "full_info | zero | linear_closed_form")
    p.add_argument("--learner-param", action="append", default=[], metavar="KEY=VALUE",
                   help="learner parameter, e.g. landmarks=4 (repeatable)")
    p.add_argument("--trials", help="Monte Carlo trials per point (default 1000)")
    p.add_argument("--seed", help="master seed (default 0)")


def _config(args):
    items = {k: getattr(args, k, None) for k in CONFIG_FLAGS}
    items = {k: v for k, v in items.items() if v is not None}
    if "sweep_values" in items and "sweep" not in items:
        items["sweep"] = "budget"
    for kv in args.learner_param:
        key, _, val = kv.partition("=")
        items[f"learner.{key}"] = val
    if args.config:
        return load_config(args.config, items)
    return config_from_mapping(items)


def cmd_generate(args) -> int:
    if args.lowrank:
        lm = np.arange(args.landmarks) if args.landmarks else np.arange(0)
        probe = build_lowrank_instance(args.d, args.m, z=np.ones(2 * args.d))
        G = nystrom_gram(probe, lm) if lm.size else None
        inst = build_lowrank_instance(args.d, args.m, z="search", gram_approx=G, seed=args.seed)
    else:
        inst = sample_hard_kernel(args.d, args.m, args.seed)
    save_instance(inst, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_run(args) -> int:
    cfg = _config(args)
    records = harness.run_records(cfg)
    harness.emit_csv(records, args.out)
    report = harness.aggregate(cfg, records)
    print(harness.format_report(report))
    print(f"wrote {args.out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if cfg.sweep is None:
        cfg = cfg.replace(sweep="budget", sweep_values=tuple(2 ** k for k in range(6, 13)))
    report, records = harness.run_scaling_experiment(cfg)
    harness.emit_sweep_csv(report, args.out)
    json_path = args.json or str(Path(args.out).with_suffix(".json"))
    harness.emit_json(report, json_path)
    if args.trials_csv:
        harness.emit_csv(records, args.trials_csv)
    print(harness.format_report(report))
    print(f"wrote {args.out} and {json_path}")
    return 0


SUITES = {
    "identities": lambda s, q: verify.verify_identities(s),
    "scalar": lambda s, q: verify.verify_scalar_minimizers(s),
    "linear": lambda s, q: verify.verify_linear_zero_query(s),
    "certificate": lambda s, q: verify.verify_norm_ball_certificate(s),
    "coverage": lambda s, q: verify.coverage_suite(trials=100 if q else 1000, seed=s),
    "minimax": lambda s, q: verify.minimax_suite(s),
    "lowrank": lambda s, q: verify.lowrank_suite(seed=s),
}


def cmd_verify(args) -> int:
    names = args.only or list(SUITES)
    failed = 0
    for name in names:
        res = SUITES[name](args.seed, args.quick)
        print(res.line(), flush=True)
        failed += not res.passed
    print(f"{len(names) - failed}/{len(names)} suites passed")
    return 1 if failed else 0


def cmd_report(args) -> int:
    doc = json.loads(Path(args.json).read_text())
    print(harness.format_report(harness.ScalingReport.from_json(doc)))
    return 0


def cmd_show_config(args) -> int:
    sys.stdout.write(dump_config(_config(args)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hardkernels",
                                 description="Budgeted kernel learning on hard block kernels.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random hard instance as JSON")
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--lowrank", action="store_true",
                   help="block-partition instance with adversarial +-1 targets")
    g.add_argument("--landmarks", type=int, default=0,
                   help="with --lowrank: search targets against this many landmark rows")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run one experiment point, write per-trial CSV")
    _add_config_flags(r)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="scaling experiment, write per-point CSV and JSON")
    _add_config_flags(s)
    s.add_argument("--sweep", help="axis: budget | lam (default budget over 2^6..2^12)")
    s.add_argument("--values", dest="sweep_values", help="comma-separated sweep values")
    s.add_argument("--out", required=True)
    s.add_argument("--json", help="JSON report path (default: --out with .json)")
    s.add_argument("--trials-csv", help="also write per-trial records here")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="run the verification suites; exit 1 on failure")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--quick", action="store_true", help="fewer coverage trials")
    v.add_argument("--only", nargs="+", choices=sorted(SUITES))
    v.set_defaults(func=cmd_verify)

    rp = sub.add_parser("report", help="print a sweep JSON report as a table")
    rp.add_argument("json")
    rp.set_defaults(func=cmd_report)

    c = sub.add_parser("config", help="print the resolved configuration")
    _add_config_flags(c)
    c.add_argument("--sweep")
    c.add_argument("--values", dest="sweep_values")
    c.set_defaults(func=cmd_show_config)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, harness.TrialError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
