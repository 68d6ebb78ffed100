"""Command line front end: run, check, fmt, serve.

Exit codes: 0 success, 1 usage, 2 validation (bad rules, traces, or
values), 3 I/O (missing or unreadable files).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import dsl, scenario
from .context import Catalog
from .errors import M3iError, ParseError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_IO = 3

CATALOG_ENV = "M3I_CATALOG"


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; this tool reserves 2 for validation.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="m3i", description="Context-driven rule engine tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="replay a trace against rules, write the timeline")
    run.add_argument("--rules", required=True, help="rule file (.m3i)")
    run.add_argument("--trace", required=True, help="event trace (.jsonl)")
    run.add_argument("--tick", type=int, help="tick interval in ms "
                     "(default: rule-file header, then 1000)")
    run.add_argument("--out", help="timeline output path (default: stdout)")
    run.add_argument("--catalog", help="factor catalog JSON "
                     f"(default: ${CATALOG_ENV}, rule-file header, built-in)")

    check = sub.add_parser("check", help="validate rules against a catalog")
    check.add_argument("--rules", required=True)
    check.add_argument("--catalog")

    fmt = sub.add_parser("fmt", help="print rules in canonical form")
    fmt.add_argument("--rules", required=True)

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--port", type=int, default=7380)
    serve.add_argument("--bind", default="127.0.0.1")
    serve.add_argument("--rules", help="rule file loaded at startup")
    serve.add_argument("--catalog")
    serve.add_argument("--tick", type=int, help="tick interval in ms")
    serve.add_argument("--mode", choices=["stepped", "live"], default="stepped")
    serve.add_argument("--ui", help="directory of static UI files to serve at /")
    return parser


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _resolve_catalog(flag: str | None, rf: dsl.RuleFile | None,
                     rules_path: str | None) -> Catalog | None:
    """Catalog precedence: --catalog flag, $M3I_CATALOG, rule-file header.

    Returns None when nothing is configured; callers fall back to the
    built-in catalog.  A header path is taken relative to the rule file.
    """
    path = flag or os.environ.get(CATALOG_ENV)
    if not path and rf is not None and rf.catalog_ref:
        base = Path(rules_path).parent if rules_path else Path(".")
        path = str(base / rf.catalog_ref)
    if not path:
        return None
    return scenario.load_catalog(path)


def _print_diagnostics(path: str, diags) -> None:
    for d in diags:
        print(f"{path}:{d.line}:{d.col}: {d.severity}: {d.message}", file=sys.stderr)


def _cmd_run(args) -> int:
    rf = dsl.parse(_read_text(args.rules))
    catalog = _resolve_catalog(args.catalog, rf, args.rules)
    effective = catalog or scenario.default_catalog()
    diags = dsl.check(rf, effective)
    if diags:
        _print_diagnostics(args.rules, diags)
        return EXIT_VALIDATION
    trace = scenario.load_trace(args.trace, effective)
    tick = args.tick or rf.tick or scenario.DEFAULT_TICK
    if tick <= 0:
        print("m3i run: error: tick interval must be positive", file=sys.stderr)
        return EXIT_VALIDATION
    reports = scenario.run(rf, trace, tick, scenario.registry_for(catalog))
    data = scenario.timeline_bytes(reports)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    return EXIT_OK


def _cmd_check(args) -> int:
    text = _read_text(args.rules)
    try:
        rf = dsl.parse(text)
    except ParseError as exc:
        _print_diagnostics(args.rules, exc.diagnostics)
        return EXIT_VALIDATION
    catalog = _resolve_catalog(args.catalog, rf, args.rules) or scenario.default_catalog()
    diags = dsl.check(rf, catalog, text)
    if diags:
        _print_diagnostics(args.rules, diags)
        return EXIT_VALIDATION
    print(f"{args.rules}: ok ({len(rf.rules)} rules)")
    return EXIT_OK


def _cmd_fmt(args) -> int:
    rf = dsl.parse(_read_text(args.rules))
    sys.stdout.write(dsl.print_rule_file(rf))
    return EXIT_OK


def _cmd_serve(args) -> int:
    from .service import ApiService  # deferred: keeps run/check/fmt import-light

    rf = None
    if args.rules:
        text = _read_text(args.rules)
        rf = dsl.parse(text)
    catalog = _resolve_catalog(args.catalog, rf, args.rules)
    service = ApiService(
        rules=rf,
        catalog=catalog,
        tick_interval=args.tick or (rf.tick if rf else None) or scenario.DEFAULT_TICK,
        mode=args.mode,
        ui_dir=args.ui,
    )
    print(f"m3i service on http://{args.bind}:{args.port} "
          f"({args.mode} mode)", file=sys.stderr)
    try:
        service.serve_forever(args.bind, args.port)
    except KeyboardInterrupt:
        pass
    finally:
        service.close()
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    handler = {
        "run": _cmd_run,
        "check": _cmd_check,
        "fmt": _cmd_fmt,
        "serve": _cmd_serve,
    }[args.command]
    try:
        return handler(args)
    except OSError as exc:
        print(f"m3i {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ParseError as exc:
        for d in exc.diagnostics:
            print(f"{d.line}:{d.col}: {d.severity}: {d.message}", file=sys.stderr)
        if not exc.diagnostics:
            print(f"m3i {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (M3iError, ValueError) as exc:
        print(f"m3i {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
