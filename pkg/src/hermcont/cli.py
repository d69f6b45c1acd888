"""Command-line entry: ``run``, ``verify-identities``, ``catalog``, ``validate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import experiments as ex
from .identities import verify_identities


def _cmd_run(args) -> int:
    try:
        cfg = ex.load_config(args.config)
    except ex.ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return ex.EXIT_INVALID
    outcome = ex.run(cfg)
    failed = [a for a in outcome.report["assertions"] if not a["passed"]]
    print(f"{cfg['name']}: {outcome.report['status']} ({len(outcome.report['assertions']) - len(failed)}"
          f"/{len(outcome.report['assertions'])} assertions) -> {outcome.directory}")
    for a in failed:
        print(f"  FAILED {a['name']}: value {a['value']} bound {a['bound']}", file=sys.stderr)
    return outcome.exit_code


def _cmd_verify(args) -> int:
    if args.n < 1 or args.count < 1:
        print("n and count must be >= 1", file=sys.stderr)
        return ex.EXIT_INVALID
    rep = verify_identities(args.n, args.seed, args.count)
    if "notice" in rep:
        print(rep["notice"], file=sys.stderr)
    sys.stdout.write(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    return ex.EXIT_OK if rep["passed"] else ex.EXIT_ASSERTION


def _cmd_catalog(args) -> int:
    entries = ex.catalog()
    if args.json:
        sys.stdout.write(json.dumps(entries, indent=2, ensure_ascii=False) + "\n")
    else:
        width = max(len(e["name"]) for e in entries)
        for e in entries:
            print(f"{e['name']:<{width}}  {e['backend']:<17} {e['description']}")
    return ex.EXIT_OK


def _cmd_validate(args) -> int:
    try:
        cfg = ex.load_config(args.config)
    except ex.ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return ex.EXIT_INVALID
    print(f"{cfg['name']}: valid ({cfg['backend']})")
    return ex.EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hermcont", description="continuity-equation experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a config file or a catalog preset")
    r.add_argument("config")
    r.set_defaults(func=_cmd_run)
    v = sub.add_parser("verify-identities", help="randomized identity suites")
    v.add_argument("--n", type=int, default=2)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--count", type=int, default=100)
    v.set_defaults(func=_cmd_verify)
    c = sub.add_parser("catalog", help="list presets")
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=_cmd_catalog)
    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")
    val.set_defaults(func=_cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
