"""Command-line driver: ``lrlab verify|antipode|preset|mine``."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .presets import PRESETS
from .report import EXIT_INPUT, TARGETS, run_antipode, run_mine, run_preset, run_verify, write_atomic


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "text"), default=argparse.SUPPRESS,
                        help="report format (default json)")
    common.add_argument("--out", metavar="PATH", default=argparse.SUPPRESS,
                        help="write the report to PATH instead of stdout")

    p = argparse.ArgumentParser(prog="lrlab", parents=[common],
                                description="Exact checks and antipode decisions for Lie-Rinehart pairs "
                                            "built from finite-dimensional Jacobi algebras.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common], help="run every structure check on a presentation")
    v.add_argument("file")

    a = sub.add_parser("antipode", parents=[common], help="decide whether a structure admits an antipode")
    a.add_argument("file")
    a.add_argument("--target", choices=TARGETS, required=True)

    pr = sub.add_parser("preset", parents=[common], help="run a built-in presentation against its known answers")
    pr.add_argument("name", choices=sorted(PRESETS))

    m = sub.add_parser("mine", parents=[common], help="search small GF(2) instances")
    m.add_argument("--dim-max", type=int, required=True)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--count", type=int, default=10)
    return p


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    fmt = getattr(args, "format", "json")
    out = getattr(args, "out", None)
    try:
        if args.command == "verify":
            report, code = run_verify(_read(args.file))
        elif args.command == "antipode":
            report, code = run_antipode(_read(args.file), args.target)
        elif args.command == "preset":
            report, code = run_preset(args.name)
        else:
            report, code = run_mine(args.dim_max, args.seed, args.count)
    except OSError as exc:
        print(f"lrlab: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = report.to_json() if fmt == "json" else report.to_text()
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)
    if "error" in report.data:
        print(f"lrlab: {report['error']['kind']}: {report['error']['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
