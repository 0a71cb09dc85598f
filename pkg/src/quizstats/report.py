"""Assemble an analysis report and serialise it as JSON or CSV."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Optional, Sequence

from . import __version__
from .descriptive import (
    DEFAULT_BUCKET_WIDTH,
    DEFAULT_SCALE,
    CohortComparison,
    GradeScale,
    Histogram,
    TestStatistics,
    map_grade,
    mark_distribution,
    test_statistics,
)
from .diagnostics import Diagnosis, FlagThresholds, ItemFlag, ResponseBreakdown, flag_items, response_breakdown
from .items import ItemStatistics, analyze_items
from .model import AttemptPolicy, AttemptRecord, Finding, Quiz, format_decimal, select_attempts, validate
from .numeric import display

SCHEMA_VERSION = 1

ITEM_CSV_COLUMNS = (
    "item_id",
    "attempts",
    "facility_index",
    "facility_band",
    "std_dev",
    "random_guess",
    "intended_weight",
    "effective_weight",
    "discrimination_index",
    "discrimination_band",
    "discrimination_efficiency",
    "flags",
)


@dataclass(frozen=True)
class GradeCount:
    label: str
    grade: str
    count: int


@dataclass(frozen=True)
class AnalysisReport:
    quiz_id: str
    attempt_policy: AttemptPolicy
    test_statistics: TestStatistics
    histogram: Histogram
    items: tuple[ItemStatistics, ...]
    flags: tuple[ItemFlag, ...]
    breakdowns: tuple[ResponseBreakdown, ...]
    tool_version: str
    input_digest: str
    grades: tuple[GradeCount, ...] = ()
    findings: tuple[Finding, ...] = ()
    annotations: Mapping[str, Diagnosis] = field(default_factory=dict)


def input_digest(*blobs: bytes) -> str:
    """SHA-256 over the inputs, each length-prefixed so boundaries matter."""
    h = hashlib.sha256()
    for blob in blobs:
        h.update(len(blob).to_bytes(8, "big"))
        h.update(blob)
    return "sha256:" + h.hexdigest()


def build_report(
    quiz: Quiz,
    attempts: Sequence[AttemptRecord],
    policy: AttemptPolicy = AttemptPolicy.FIRST,
    *,
    thresholds: FlagThresholds = FlagThresholds(),
    scale: GradeScale = DEFAULT_SCALE,
    bucket_width_pct=DEFAULT_BUCKET_WIDTH,
    digest: str = "",
    annotations: Optional[Mapping[str, Diagnosis]] = None,
) -> AnalysisReport:
    annotations = dict(annotations or {})
    for iid in annotations:
        quiz.item(iid)  # raises UNKNOWN_ITEM
    matrix = select_attempts(attempts, policy, quiz)
    stats = analyze_items(quiz, matrix)
    grade_counts: dict[tuple[str, str], int] = {}
    for band in scale.bands:
        grade_counts.setdefault((band.label, format_decimal(band.grade)), 0)
    for pct in matrix.total_percentages():
        g = map_grade(pct, scale)
        grade_counts[(g.label, format_decimal(g.grade))] += 1
    return AnalysisReport(
        quiz_id=quiz.quiz_id,
        attempt_policy=AttemptPolicy(policy),
        test_statistics=test_statistics(attempts, quiz),
        histogram=mark_distribution(matrix, bucket_width_pct),
        items=tuple(stats),
        flags=tuple(flag_items(stats, thresholds)),
        breakdowns=tuple(response_breakdown(matrix, item) for item in quiz.items),
        tool_version=__version__,
        input_digest=digest,
        grades=tuple(GradeCount(label, grade, n) for (label, grade), n in grade_counts.items()),
        findings=validate(quiz, attempts).findings,
        annotations=annotations,
    )


# --------------------------------------------------------------------------
# JSON


def _pct(value: Optional[float]):
    if value is None:
        return None
    return {"value": value, "display": display(value)}


def _test_stats_json(ts: TestStatistics) -> dict:
    return {
        "n_first_attempts": ts.n_first_attempts,
        "n_all_attempts": ts.n_all_attempts,
        "mean_first_pct": _pct(ts.mean_first_pct),
        "mean_last_pct": _pct(ts.mean_last_pct),
        "mean_overall_pct": _pct(ts.mean_overall_pct),
        "median_pct": _pct(ts.median_pct),
        "stddev_pct": _pct(ts.stddev_pct),
        "min_pct": _pct(ts.min_pct),
        "max_pct": _pct(ts.max_pct),
    }


def _item_json(s: ItemStatistics, flags: Sequence[ItemFlag], note: Optional[Diagnosis]) -> dict:
    return {
        "item_id": s.item_id,
        "attempts": s.attempts_count,
        "facility_index": _pct(s.facility_index),
        "facility_band": s.facility_band.name,
        "std_dev": _pct(s.std_dev_pct),
        "random_guess": _pct(s.random_guess_pct),
        "intended_weight": _pct(s.intended_weight_pct),
        "effective_weight": _pct(s.effective_weight),
        "discrimination_index": _pct(s.discrimination_index),
        "discrimination_band": s.discrimination_band.name if s.discrimination_band else None,
        "discrimination_efficiency": _pct(s.discrimination_efficiency),
        "flags": [f.flag_kind.name for f in flags],
        "diagnosis": note.name if note else None,
    }


def report_to_dict(report: AnalysisReport) -> dict:
    flags_by_item: dict[str, list[ItemFlag]] = {}
    for f in report.flags:
        flags_by_item.setdefault(f.item_id, []).append(f)
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": report.tool_version,
        "quiz_id": report.quiz_id,
        "attempt_policy": report.attempt_policy.value,
        "input_digest": report.input_digest,
        "test_statistics": _test_stats_json(report.test_statistics),
        "histogram": {
            "bucket_width_pct": report.histogram.bucket_width_pct,
            "buckets": [
                {"lower_pct": b.lower_pct, "upper_pct": b.upper_pct, "count": b.count}
                for b in report.histogram.buckets
            ],
        },
        "grades": [{"label": g.label, "grade": g.grade, "count": g.count} for g in report.grades],
        "items": [
            _item_json(s, flags_by_item.get(s.item_id, ()), report.annotations.get(s.item_id))
            for s in report.items
        ],
        "flags": [
            {"item_id": f.item_id, "flag_kind": f.flag_kind.name, "detail": f.detail} for f in report.flags
        ],
        "breakdowns": [
            {
                "item_id": b.item_id,
                "rows": [
                    {
                        "response": r.response,
                        "credited": r.credited.name,
                        "count": r.count,
                        "percent": _pct(r.percent),
                    }
                    for r in b.rows
                ],
                "option_discrimination": {k: _pct(v) for k, v in b.option_discrimination.items()},
            }
            for b in report.breakdowns
        ],
        "findings": [{"kind": f.kind, "subject": f.subject, "detail": f.detail} for f in report.findings],
    }


def report_to_json(report: AnalysisReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def report_schema() -> dict:
    return json.loads(resources.files("quizstats").joinpath("report_schema.json").read_text("utf-8"))


# --------------------------------------------------------------------------
# CSV


def report_to_csv(report: AnalysisReport) -> str:
    """Item table with one row per question, figures rounded to 2 dp."""
    flags_by_item: dict[str, list[str]] = {}
    for f in report.flags:
        flags_by_item.setdefault(f.item_id, []).append(f.flag_kind.name)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(ITEM_CSV_COLUMNS)
    for s in report.items:
        writer.writerow([
            s.item_id,
            s.attempts_count,
            display(s.facility_index),
            s.facility_band.name,
            display(s.std_dev_pct),
            display(s.random_guess_pct) or "",
            display(s.intended_weight_pct),
            display(s.effective_weight) or "",
            display(s.discrimination_index) or "",
            s.discrimination_band.name if s.discrimination_band else "",
            display(s.discrimination_efficiency) or "",
            ";".join(flags_by_item.get(s.item_id, [])),
        ])
    return buf.getvalue()


# --------------------------------------------------------------------------
# cohort comparison


COMPARISON_CSV_COLUMNS = (
    "student_id", "pct_a", "label_a", "grade_a", "pct_b", "label_b", "grade_b", "delta",
)


def comparison_to_dict(cmp: CohortComparison) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "per_student": [
            {
                "student_id": p.student_id,
                "pct_a": _pct(float(p.pct_a)),
                "label_a": p.grade_a.label,
                "grade_a": format(p.grade_a.grade, "f"),
                "pct_b": _pct(float(p.pct_b)),
                "label_b": p.grade_b.label,
                "grade_b": format(p.grade_b.grade, "f"),
                "delta": _pct(float(p.delta)),
            }
            for p in cmp.per_student
        ],
        "mean_a_pct": _pct(cmp.mean_a_pct),
        "mean_b_pct": _pct(cmp.mean_b_pct),
        "mean_grade_a": {"value": cmp.mean_grade_a, "display": display(cmp.mean_grade_a)},
        "mean_grade_b": {"value": cmp.mean_grade_b, "display": display(cmp.mean_grade_b)},
        "grade_of_mean_a": {"label": cmp.grade_of_mean_a.label, "grade": format(cmp.grade_of_mean_a.grade, "f")},
        "grade_of_mean_b": {"label": cmp.grade_of_mean_b.label, "grade": format(cmp.grade_of_mean_b.grade, "f")},
    }


def comparison_to_json(cmp: CohortComparison) -> str:
    return json.dumps(comparison_to_dict(cmp), indent=2, ensure_ascii=False) + "\n"


def comparison_to_csv(cmp: CohortComparison) -> str:
    """Per-student rows followed by an ``(average)`` row, as in a gradebook."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(COMPARISON_CSV_COLUMNS)
    for p in cmp.per_student:
        writer.writerow([
            p.student_id,
            display(p.pct_a), p.grade_a.label, format(p.grade_a.grade, "f"),
            display(p.pct_b), p.grade_b.label, format(p.grade_b.grade, "f"),
            display(p.delta),
        ])
    writer.writerow([
        "(average)",
        display(cmp.mean_a_pct), cmp.grade_of_mean_a.label, format(cmp.grade_of_mean_a.grade, "f"),
        display(cmp.mean_b_pct), cmp.grade_of_mean_b.label, format(cmp.grade_of_mean_b.grade, "f"),
        display(cmp.mean_b_pct - cmp.mean_a_pct),
    ])
    return buf.getvalue()
