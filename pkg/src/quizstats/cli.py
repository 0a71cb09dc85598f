"""``quizstats`` command line.

Exit codes: 0 success, 2 usage error, 3 unreadable/malformed input,
4 input that parses but fails validation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .descriptive import DEFAULT_BUCKET_WIDTH, DEFAULT_SCALE, compare_cohorts, parse_results, parse_scale
from .diagnostics import Diagnosis, FlagThresholds, parse_thresholds
from .errors import ParseError, QuizStatsError
from .model import AttemptPolicy, parse_attempts, parse_quiz, serialize_attempts, serialize_quiz
from .report import (
    build_report,
    comparison_to_csv,
    comparison_to_json,
    input_digest,
    report_to_csv,
    report_to_json,
)
from .sim import generate_cohort, parse_sim_spec

log = logging.getLogger("quizstats")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_SEMANTIC = 4


def _read(path: str) -> tuple[str, bytes]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read: {exc.strerror}", source=path) from None
    try:
        return raw.decode("utf-8-sig"), raw
    except UnicodeDecodeError as exc:
        raise ParseError(f"not valid UTF-8 (byte {exc.start})", source=path) from None


def _write(path: Optional[str], text: str):
    data = text.encode("utf-8")
    if path is None or path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        Path(path).write_bytes(data)


def _policy(value: str) -> AttemptPolicy:
    try:
        return AttemptPolicy(value.lower())
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"invalid policy {value!r} (choose from first, last, all, highest)"
        ) from None


def _width(value: str) -> Decimal:
    try:
        return Decimal(value)
    except InvalidOperation:
        raise argparse.ArgumentTypeError(f"not a number: {value!r}") from None


def _quiz_format(path: str, explicit: Optional[str]) -> str:
    if explicit:
        return explicit
    return "csv" if path.lower().endswith(".csv") else "json"


def _parse_annotations(text: str, source: str) -> dict[str, Diagnosis]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, source=source, line=exc.lineno, column=exc.colno) from None
    if not isinstance(doc, dict):
        raise ParseError("annotations must be an object mapping item_id to a diagnosis", source=source)
    out = {}
    for iid, name in doc.items():
        try:
            out[iid] = Diagnosis[name]
        except (KeyError, TypeError):
            choices = ", ".join(d.name for d in Diagnosis)
            raise ParseError(f"unknown diagnosis {name!r} for {iid!r} (choose from {choices})", source=source) from None
    return out


def cmd_analyze(args) -> int:
    quiz_text, quiz_raw = _read(args.quiz)
    quiz = parse_quiz(quiz_text, _quiz_format(args.quiz, args.quiz_format), source=args.quiz)
    att_text, att_raw = _read(args.attempts)
    attempts = parse_attempts(att_text, quiz, source=args.attempts)

    thresholds = FlagThresholds()
    if args.thresholds:
        thresholds = parse_thresholds(_read(args.thresholds)[0], source=args.thresholds)
    scale = DEFAULT_SCALE
    if args.scale:
        scale = parse_scale(_read(args.scale)[0], source=args.scale)
    annotations = None
    if args.annotations:
        annotations = _parse_annotations(_read(args.annotations)[0], args.annotations)

    report = build_report(
        quiz,
        attempts,
        args.policy,
        thresholds=thresholds,
        scale=scale,
        bucket_width_pct=args.bucket_width,
        digest=input_digest(quiz_raw, att_raw),
        annotations=annotations,
    )
    log.info("analysed %d attempts on %d items", len(attempts), len(quiz.items))
    _write(args.out, report_to_json(report) if args.format == "json" else report_to_csv(report))
    return EXIT_OK


def cmd_compare(args) -> int:
    a = parse_results(_read(args.a)[0], source=args.a)
    b = parse_results(_read(args.b)[0], source=args.b)
    scale = parse_scale(_read(args.scale)[0], source=args.scale) if args.scale else DEFAULT_SCALE
    cmp = compare_cohorts(a, b, scale)
    _write(args.out, comparison_to_json(cmp) if args.format == "json" else comparison_to_csv(cmp))
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = parse_sim_spec(_read(args.spec)[0], source=args.spec)
    quiz, attempts = generate_cohort(spec)
    _write(args.out_quiz, serialize_quiz(quiz, _quiz_format(args.out_quiz, None)))
    _write(args.out_attempts, serialize_attempts(attempts, quiz))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quizstats", description="Item analysis for exported quiz attempts.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="test and item statistics for one quiz")
    p.add_argument("--quiz", required=True)
    p.add_argument("--quiz-format", choices=("json", "csv"))
    p.add_argument("--attempts", required=True)
    p.add_argument("--policy", type=_policy, default=AttemptPolicy.FIRST, metavar="{first,last,all,highest}")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out")
    p.add_argument("--thresholds")
    p.add_argument("--scale")
    p.add_argument("--annotations", help="JSON mapping item_id to a diagnosis name")
    p.add_argument("--bucket-width", type=_width, default=DEFAULT_BUCKET_WIDTH)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare", help="pair two result lists and grade them")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--scale")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", help="generate a synthetic cohort")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-quiz", required=True)
    p.add_argument("--out-attempts", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"quizstats: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except QuizStatsError as exc:
        print(f"quizstats: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC
