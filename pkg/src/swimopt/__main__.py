"""Command line: ``python -m swimopt {run,sweep,validate}`` and ``--regen-golden``."""

import argparse
import json
import os
import sys

from . import golden, harness


def _log(msg):
    print(msg, file=sys.stderr, flush=True)


def build_parser():
    ap = argparse.ArgumentParser(prog="swimopt", description=__doc__)
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("--out-dir", default="runs", help="artifact directory (default: runs)")
    ap.add_argument("--regen-golden", action="store_true",
                    help="recompute the stored oracle values before running the command")
    sub = ap.add_subparsers(dest="command")

    run = sub.add_parser("run", help="optimize one experiment config")
    run.add_argument("config", help="path to a config file or the name of a bundled config")
    run.add_argument("--budget", type=int, default=None, help="override the evaluation budget")

    sw = sub.add_parser("sweep", help="run a study")
    sw.add_argument("study", choices=harness.STUDIES)
    sw.add_argument("--budget", type=int, default=None, help="evaluation budget for optimizing studies")

    val = sub.add_parser("validate", help="check a config against the schema")
    val.add_argument("config")

    sub.add_parser("list", help="list bundled configs")
    return ap


def _resolve(config):
    if os.path.exists(config):
        return config
    path = os.path.join(harness.CONFIG_DIR, config if config.endswith(".json") else config + ".json")
    if os.path.exists(path):
        return path
    raise harness.ConfigError(f"no config file or bundled config named {config!r}")


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.regen_golden:
        data = golden.regenerate()
        _log(f"golden values written to {golden.GOLDEN_PATH}")
        if args.command is None:
            print(json.dumps(data, indent=2, sort_keys=True))
            return 0
    if args.command is None:
        ap.print_help()
        return 2
    try:
        if args.command == "validate":
            cfg = harness.load_config(_resolve(args.config))
            print(f"{cfg['name']}: valid")
            return 0
        if args.command == "list":
            for p in harness.bundled_configs():
                print(os.path.splitext(os.path.basename(p))[0])
            return 0
        if args.command == "run":
            path = _resolve(args.config)
            cfg = harness.load_config(path)
            out = os.path.join(args.out_dir, cfg["name"])
            summary = harness.run_experiment(path, out, seed=args.seed, budget=args.budget, log=_log)
            print(json.dumps(summary, indent=2, sort_keys=True))
            _log(f"artifacts in {out}")
            return 0
        out = os.path.join(args.out_dir, args.study)
        harness.run_study(args.study, out, seed=args.seed or 0, budget=args.budget, log=_log)
        _log(f"artifacts in {out}")
        return 0
    except harness.ConfigError as exc:
        _log(f"invalid config: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
