"""Command line entry point: ``hslab <experiment> [--config PATH] [--out DIR] ...``."""
from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from . import harness as HN


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hslab", description="Near-flat Hele-Shaw numerical lab.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in HN.KINDS + ("all",):
        s = sub.add_parser(name, help=f"run the {name} experiment" if name != "all"
                           else "run every experiment at acceptance settings")
        if name != "all":
            s.add_argument("--config", metavar="PATH", help="TOML config; defaults are used when omitted")
        s.add_argument("--out", metavar="DIR", help=f"output directory (default ${HN.ENV_OUTPUT_ROOT}/<kind>)")
        s.add_argument("--threads", type=int, default=1, metavar="N", help="parallel sweep workers")
        s.add_argument("--strict", action="store_true", help="treat warnings as failures")
    return p


def _status(checks: dict) -> str:
    return ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in checks.items())


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return HN.EXIT_CONFIG
    if args.command == "all":
        out = HN.resolve_output(None, "all", args.out)
        code, results, _ = HN.execute_all(out, args.threads, args.strict)
        for c, res, _m in results:
            print(f"{res.kind:10s} exit={c} {_status(res.checks)}")
            for line in res.diagnostics:
                print(f"  {line}")
        print(f"output: {out}")
        return code
    try:
        if args.config:
            cfg = HN.parse_config(args.config)
            if cfg.kind != args.command:
                raise HN.ConfigError([f"kind: config declares {cfg.kind!r} but the subcommand is "
                                      f"{args.command!r}"])
        else:
            cfg = HN.build_config({"kind": args.command})
    except HN.ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return HN.EXIT_CONFIG
    out = HN.resolve_output(cfg, cfg.kind, args.out)
    code, res, man = HN.execute(cfg, out, args.threads, args.strict)
    print(f"{cfg.kind}: {_status(res.checks)}")
    for w in res.warnings:
        print(f"warning: {w}")
    for line in res.diagnostics:
        print(line)
    if man["error"]:
        print(f"numeric failure: {man['error']}", file=sys.stderr)
    print(f"output: {out} (exit {code})")
    return code


if __name__ == "__main__":
    sys.exit(main())
