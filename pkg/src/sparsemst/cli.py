"""Command-line front end for the experiment harness.

Subcommands:

    run      execute a config's n x seeds cross-product, write reports
    sweep    alias of run (conventionally used for multi-n configs)
    verify   execute without writing files; print per-run verdicts
    scaling  fit the log-log message slope of an existing runs CSV

Exit codes: 0 ok, 2 config error, 3 oracle mismatch, 4 invariant
violation, 5 livelock.
"""

from __future__ import annotations

import argparse
import sys

from .harness import (ConfigError, parse_config, read_csv_rows,
                      run_experiment, scaling_check, write_outputs)

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ORACLE = 3
EXIT_INVARIANT = 4
EXIT_LIVELOCK = 5


def _add_common(p):
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--seed", type=int, default=None,
                   help="replace the config's seed list with one seed")
    p.add_argument("--policy", default=None, help="override delay policy")
    p.add_argument("--out", default=None, help="override output directory")
    p.add_argument("--check", choices=["off", "phase", "full"], default=None,
                   help="override invariant-check level")


def _overrides(args) -> dict:
    out = {}
    if args.seed is not None:
        out["seeds"] = [args.seed]
    if args.policy is not None:
        out["policy"] = args.policy
    if args.out is not None:
        out["out"] = args.out
    if getattr(args, "check", None) is not None:
        out["check"] = args.check
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sparsemst",
        description="sparse-message spanning tree/MST experiment harness")
    sub = parser.add_subparsers(dest="cmd", required=True)
    for name in ("run", "sweep", "verify"):
        _add_common(sub.add_parser(name))
    sc = sub.add_parser("scaling")
    sc.add_argument("--config", required=True,
                    help="config with csv = <path> and slope_bound = <f>")

    args = parser.parse_args(argv)
    try:
        if args.cmd == "scaling":
            cfg = parse_config(args.config)
            if cfg.csv_in is None or cfg.slope_bound is None:
                raise ConfigError("scaling needs csv = and slope_bound = "
                                  "keys in the config")
            passed, slope = scaling_check(read_csv_rows(cfg.csv_in),
                                          cfg.slope_bound)
            print(f"slope {slope:.4f} bound {cfg.slope_bound} "
                  f"{'PASS' if passed else 'FAIL'}")
            return EXIT_OK if passed else EXIT_ORACLE
        cfg = parse_config(args.config, overrides=_overrides(args))
        if args.cmd == "verify":
            cfg.out = None
        reports, rows, status = run_experiment(cfg)
        write_outputs(cfg, reports, rows)
        for rep in reports:
            if "error" in rep:
                print(f"n={rep['n']} seed={rep['seed']} ERROR {rep['error']}")
                continue
            verdict = "ok" if rep["oracle"]["match"] else "ORACLE MISMATCH"
            vio = len(rep["violations"])
            extra = f" violations={vio}" if vio else ""
            print(f"n={rep['n']} seed={rep['seed']} "
                  f"messages={rep['metrics']['total']} {verdict}{extra}")
        return status
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
