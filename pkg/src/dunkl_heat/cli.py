"""Command line entry point: ``dunkl-heat <suite> [--config FILE] [--out DIR] [--seed N] [--jobs N]``.

Each suite writes its CSV tables and a ``summary.json`` into --out and exits
with status 0 on PASS, 1 on FAIL and 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import harness
from .errors import DunklError

log = logging.getLogger("dunkl_heat")

SUITES = ("verify-bounds", "identities", "lambda-check", "pde-run", "volume-check")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dunkl-heat",
                                 description="Measure constants in Dunkl heat kernel bounds.")
    ap.add_argument("suite", choices=SUITES)
    ap.add_argument("--config", help="JSON file with SweepConfig fields")
    ap.add_argument("--out", default="dunkl_out", help="output directory (default: %(default)s)")
    ap.add_argument("--seed", type=int, help="overrides the config seed")
    ap.add_argument("--jobs", type=int, help="worker processes for kernel sweeps")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def load_config(args) -> harness.SweepConfig:
    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.jobs is not None:
        data["jobs"] = args.jobs
    data["out"] = args.out
    if args.suite == "pde-run" and "system" not in data:
        data["system"] = {"family": "dihedral", "m": 3, "k_even": 1.0}
    return harness.SweepConfig.from_dict(data)


def run(args) -> bool:
    cfg = load_config(args)
    out = harness.ensure_dir(args.out)
    log.info("running %s with seed %d into %s", args.suite, cfg.seed, out)
    summary = os.path.join(out, "summary.json")
    if args.suite == "verify-bounds":
        rep = harness.run_verify_bounds(cfg)
        rep.write_csv(os.path.join(out, "envelope.csv"))
        harness.write_summary(summary, args.suite, rep.passed, rep.summary, {}, cfg, rep.flags)
        return rep.passed
    if args.suite == "pde-run":
        res = harness.run_pde_suite(cfg, snapshot_path=os.path.join(out, "snapshots.csv"))
    elif args.suite == "identities":
        res = harness.run_identity_suite(cfg)
    elif args.suite == "lambda-check":
        res = harness.run_lambda_crosscheck(cfg)
    else:
        res = harness.run_volume_check(cfg)
    for name, table in res.get("tables", {}).items():
        harness.write_columns(os.path.join(out, f"{name}.csv"), table)
    harness.write_summary(summary, args.suite, res["pass"], res["empirical_constants"],
                          res["max_residuals"], cfg, res["flags"])
    return res["pass"]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        ok = run(args)
    except (DunklError, ValueError, OSError) as exc:
        print(f"dunkl-heat: error: {exc}", file=sys.stderr)
        return 2
    print(f"{args.suite}: {'PASS' if ok else 'FAIL'} (summary in {os.path.join(args.out, 'summary.json')})")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
