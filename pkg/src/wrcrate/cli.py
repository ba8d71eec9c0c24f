"""Command-line front door.

Exit codes are a stable contract for scripting: 0 success, 1 validation
found errors, 2 usage or parse failure, 3 a run finished with a failed step.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .engine import AgentDescriptor, execute, load_plan
from .errors import WrcrateError
from .model import CrateDocument, load_crate
from .prov import export_prov, render_provn
from .query import builtin_actions_query, expand_triples, match, parse_pattern
from .report import action_views, dataflow_anomalies, render_report, views_to_json
from .terms import PROFILES, ProfileKind
from .validate import validate, validate_auto

EXIT_OK = 0
EXIT_NONCONFORMANT = 1
EXIT_USAGE = 2
EXIT_STEP_FAILED = 3


def _fail(message: str) -> int:
    print(f"wrcrate: {message}", file=sys.stderr)
    return EXIT_USAGE


def _load(crate_path: str) -> CrateDocument:
    return load_crate(Path(crate_path))


def _cmd_validate(args) -> int:
    try:
        doc = _load(args.crate)
    except (WrcrateError, OSError) as exc:
        return _fail(str(exc))
    if args.profile == "auto":
        report = validate_auto(doc, payload_check=args.payload_check)
    else:
        profile = PROFILES[ProfileKind(args.profile)]
        report = validate(doc, profile, payload_check=args.payload_check)
    if args.format == "machine":
        sys.stdout.write(report.to_json())
    else:
        sys.stdout.write(report.to_text())
        print(
            f"{'conformant' if report.conformant else 'NOT conformant'} "
            f"({report.profile.kind.value} profile)"
        )
    return EXIT_OK if report.conformant else EXIT_NONCONFORMANT


def _cmd_report(args) -> int:
    try:
        doc = _load(args.crate)
    except (WrcrateError, OSError) as exc:
        return _fail(str(exc))
    views = action_views(doc)
    if args.format == "machine":
        sys.stdout.write(views_to_json(views))
    else:
        sys.stdout.write(render_report(views))
    for anomaly in dataflow_anomalies(doc):
        print(f"wrcrate: warning: {anomaly}", file=sys.stderr)
    return EXIT_OK


def _cmd_prov(args) -> int:
    try:
        doc = _load(args.crate)
        pd = export_prov(doc)
    except (WrcrateError, OSError) as exc:
        return _fail(str(exc))
    text = render_provn(pd)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _render_cell(value) -> str:
    if value is None:
        return ""
    text = getattr(value, "text", None)
    return text if text is not None else str(value)


def _cmd_query(args) -> int:
    try:
        doc = _load(args.crate)
    except (WrcrateError, OSError) as exc:
        return _fail(str(exc))
    if args.actions:
        for row in builtin_actions_query(doc):
            print("\t".join(_render_cell(v) for v in row))
        return EXIT_OK
    try:
        patterns = [parse_pattern(p) for p in args.pattern]
    except WrcrateError as exc:
        return _fail(str(exc))
    triples = expand_triples(doc)
    variables: list[str] = []
    for pattern in patterns:
        for term in (pattern.s, pattern.p, pattern.o):
            if isinstance(term, str) and term.startswith("?") and term not in variables:
                variables.append(term)
    for binding in match(triples, patterns):
        print("\t".join(_render_cell(binding.get(v)) for v in variables))
    return EXIT_OK


def _cmd_run(args) -> int:
    inputs = {}
    for item in args.input:
        key, sep, value = item.partition("=")
        if not sep or not key:
            return _fail(f"--input expects key=value, got {item!r}")
        inputs[key] = value
    try:
        plan = load_plan(Path(args.plan).read_text(encoding="utf-8"))
    except (WrcrateError, OSError) as exc:
        return _fail(str(exc))
    deterministic = True if args.deterministic_ids else None
    try:
        doc, record = execute(
            plan,
            inputs,
            args.output,
            agent=AgentDescriptor(name=args.agent),
            deterministic_ids=deterministic,
        )
    except (WrcrateError, OSError) as exc:
        return _fail(str(exc))
    if not record.success:
        print(f"wrcrate: run failed: {record.error}", file=sys.stderr)
        return EXIT_STEP_FAILED
    print(f"crate written to {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wrcrate",
        description="Workflow Run RO-Crate toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a crate against a run profile")
    p.add_argument("crate", help="crate root directory")
    p.add_argument(
        "--profile",
        choices=["process", "workflow", "provenance", "auto"],
        default="auto",
    )
    p.add_argument("--payload-check", action="store_true",
                   help="also check that payload files exist")
    p.add_argument("--format", choices=["text", "machine"], default="text")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("report", help="print the execution report")
    p.add_argument("crate", help="crate root directory")
    p.add_argument("--format", choices=["text", "machine"], default="text")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("prov", help="export retrospective provenance as PROV-N")
    p.add_argument("crate", help="crate root directory")
    p.add_argument("-o", "--output", help="output file (default: stdout)")
    p.set_defaults(func=_cmd_prov)

    p = sub.add_parser("query", help="run graph-pattern queries over a crate")
    p.add_argument("crate", help="crate root directory")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--actions", action="store_true",
                       help="built-in query: actions with instruments and times")
    group.add_argument("--pattern", nargs="+", metavar="PATTERN",
                       help="patterns: [OPTIONAL] <s> <p> <o>, terms are "
                            "?var, <iri> or \"literal\"")
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("run", help="execute a run plan and emit a crate")
    p.add_argument("plan", help="plan file (JSON)")
    p.add_argument("--input", action="append", default=[], metavar="PARAM=VALUE",
                   help="bind a workflow input parameter")
    p.add_argument("-o", "--output", required=True, help="crate output directory")
    p.add_argument("--agent", default="anonymous", help="name of the executing person")
    p.add_argument("--deterministic-ids", action="store_true",
                   help="mint sequential action ids instead of UUIDs")
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
