"""Test-level statistics, mark distribution and grade-scale mapping."""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Optional, Sequence, Union

from .errors import ParseError, ValidationError
from .model import AttemptPolicy, AttemptRecord, Quiz, ResponseMatrix, TextInput, select_records, to_decimal

Percent = Union[int, float, Decimal, Fraction]


def _exact(value: Percent) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(Decimal(value))
    return Fraction(value)


@dataclass(frozen=True)
class TestStatistics:
    n_first_attempts: int
    n_all_attempts: int
    mean_first_pct: float
    mean_last_pct: float
    mean_overall_pct: float
    median_pct: float
    stddev_pct: Optional[float]
    min_pct: float
    max_pct: float

    __test__ = False  # not a pytest class


def test_statistics(attempts: Sequence[AttemptRecord], quiz: Quiz) -> TestStatistics:
    """Summary of attempt totals as percentages of the quiz maximum.

    Means for first and last attempts use one attempt per student; the
    overall mean, median and sample standard deviation use every attempt.
    """
    if not attempts:
        raise ValidationError("no attempts to summarise", code="EMPTY")

    max_total = Fraction(quiz.total_max_score)

    def pcts(policy):
        return [Fraction(rec.total) * 100 / max_total for rec in select_records(attempts, policy)]

    first = pcts(AttemptPolicy.FIRST)
    last = pcts(AttemptPolicy.LAST)
    overall = pcts(AttemptPolicy.ALL)
    stdev = float(statistics.stdev(overall)) if len(overall) >= 2 else None
    return TestStatistics(
        n_first_attempts=len(first),
        n_all_attempts=len(overall),
        mean_first_pct=float(statistics.mean(first)),
        mean_last_pct=float(statistics.mean(last)),
        mean_overall_pct=float(statistics.mean(overall)),
        median_pct=float(statistics.median(overall)),
        stddev_pct=stdev,
        min_pct=float(min(overall)),
        max_pct=float(max(overall)),
    )

test_statistics.__test__ = False


@dataclass(frozen=True)
class Bucket:
    lower_pct: float
    upper_pct: float
    count: int


@dataclass(frozen=True)
class Histogram:
    bucket_width_pct: float
    buckets: tuple[Bucket, ...]

    @property
    def total(self) -> int:
        return sum(b.count for b in self.buckets)


DEFAULT_BUCKET_WIDTH = 5


def mark_distribution(matrix: ResponseMatrix, bucket_width_pct: Percent = DEFAULT_BUCKET_WIDTH) -> Histogram:
    """Bucket row totals into ``[lower, upper)`` bins; the last bin is closed at 100."""
    width = _exact(bucket_width_pct)
    if width <= 0 or (100 / width).denominator != 1:
        raise ValidationError(f"bucket width {bucket_width_pct} does not divide 100", code="BAD_WIDTH")
    n_buckets = int(100 / width)
    counts = [0] * n_buckets
    for pct in matrix.total_percentages():
        counts[min(int(pct // width), n_buckets - 1)] += 1
    buckets = tuple(Bucket(float(k * width), float((k + 1) * width), counts[k]) for k in range(n_buckets))
    return Histogram(float(width), buckets)


# --------------------------------------------------------------------------
# grade scale


@dataclass(frozen=True)
class GradeBand:
    lower_pct: Decimal
    label: str
    grade: Decimal


@dataclass(frozen=True)
class Grade:
    label: str
    grade: Decimal


@dataclass(frozen=True)
class GradeScale:
    bands: tuple[GradeBand, ...]

    def __post_init__(self):
        object.__setattr__(self, "bands", tuple(self.bands))
        if not self.bands:
            raise ValidationError("grade scale has no bands")
        if self.bands[0].lower_pct != 0:
            raise ValidationError("first grade band must start at 0")
        for prev, band in zip(self.bands, self.bands[1:]):
            if band.lower_pct <= prev.lower_pct:
                raise ValidationError("grade band lower bounds must be strictly increasing")
            if band.grade < prev.grade:
                raise ValidationError("numeric grades must not decrease across bands")
        if self.bands[-1].lower_pct > 100:
            raise ValidationError("grade band lower bound above 100")


# Bands below 58% are a default guess; the ones above are fixed by the
# published paper-based/electronic comparison of ten students.
DEFAULT_SCALE = GradeScale((
    GradeBand(Decimal("0"), "Fail", Decimal("2.00")),
    GradeBand(Decimal("41"), "Satisfactory", Decimal("3.00")),
    GradeBand(Decimal("50"), "Good", Decimal("4.00")),
    GradeBand(Decimal("58"), "Very Good", Decimal("4.50")),
    GradeBand(Decimal("65"), "Excellent", Decimal("5.50")),
    GradeBand(Decimal("75"), "Excellent", Decimal("6.00")),
))


def parse_scale(stream: TextInput, *, source: Optional[str] = None) -> GradeScale:
    """``{"bands": [{"lower_pct": "0", "label": "Fail", "grade": "2.00"}, ...]}``"""
    text = stream if isinstance(stream, str) else stream.read()
    try:
        doc = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, source=source, line=exc.lineno, column=exc.colno) from None
    if not isinstance(doc, dict) or not isinstance(doc.get("bands"), list):
        raise ParseError("scale document must be an object with a 'bands' list", source=source)
    bands = []
    for i, raw in enumerate(doc["bands"]):
        if not isinstance(raw, dict) or not isinstance(raw.get("label"), str):
            raise ParseError(f"bands[{i}] must be an object with a string label", source=source)
        bands.append(GradeBand(
            to_decimal(raw.get("lower_pct"), f"bands[{i}].lower_pct", source=source),
            raw["label"],
            to_decimal(raw.get("grade"), f"bands[{i}].grade", source=source),
        ))
    return GradeScale(tuple(bands))


def map_grade(pct: Percent, scale: GradeScale = DEFAULT_SCALE) -> Grade:
    value = _exact(pct)
    if not (0 <= value <= 100):
        raise ValidationError(f"percentage {pct} outside [0, 100]", code="RANGE")
    chosen = scale.bands[0]
    for band in scale.bands:
        if Fraction(band.lower_pct) <= value:
            chosen = band
        else:
            break
    return Grade(chosen.label, chosen.grade)


# --------------------------------------------------------------------------
# paired cohorts


@dataclass(frozen=True)
class PairedResult:
    student_id: str
    pct_a: Decimal
    grade_a: Grade
    pct_b: Decimal
    grade_b: Grade

    @property
    def delta(self) -> Decimal:
        return self.pct_b - self.pct_a


@dataclass(frozen=True)
class CohortComparison:
    per_student: tuple[PairedResult, ...]
    mean_a_pct: float
    mean_b_pct: float
    mean_grade_a: float
    mean_grade_b: float
    grade_of_mean_a: Grade
    grade_of_mean_b: Grade


def compare_cohorts(
    results_a: Sequence[tuple[str, Decimal]],
    results_b: Sequence[tuple[str, Decimal]],
    scale: GradeScale = DEFAULT_SCALE,
) -> CohortComparison:
    """Pair two result lists by student and average each side."""
    def index(results, side):
        out = {}
        for student, pct in results:
            if student in out:
                raise ValidationError(f"student {student!r} listed twice in cohort {side}", code="MISMATCH")
            out[student] = pct
        return out

    a = index(results_a, "a")
    b = index(results_b, "b")
    only_a = sorted(set(a) - set(b))
    only_b = sorted(set(b) - set(a))
    if only_a or only_b:
        parts = []
        if only_a:
            parts.append("missing from b: " + ", ".join(only_a))
        if only_b:
            parts.append("missing from a: " + ", ".join(only_b))
        raise ValidationError("; ".join(parts), code="MISMATCH")
    if not a:
        raise ValidationError("no students to compare", code="EMPTY")

    pairs = tuple(
        PairedResult(s, Decimal(a[s]), map_grade(a[s], scale), Decimal(b[s]), map_grade(b[s], scale))
        for s, _ in results_a
    )
    mean_a = statistics.mean(_exact(p.pct_a) for p in pairs)
    mean_b = statistics.mean(_exact(p.pct_b) for p in pairs)
    return CohortComparison(
        per_student=pairs,
        mean_a_pct=float(mean_a),
        mean_b_pct=float(mean_b),
        mean_grade_a=float(statistics.mean(Fraction(p.grade_a.grade) for p in pairs)),
        mean_grade_b=float(statistics.mean(Fraction(p.grade_b.grade) for p in pairs)),
        grade_of_mean_a=map_grade(mean_a, scale),
        grade_of_mean_b=map_grade(mean_b, scale),
    )


def parse_results(stream: TextInput, *, source: Optional[str] = None) -> list[tuple[str, Decimal]]:
    """Read a ``student_id,percentage`` CSV."""
    text = stream if isinstance(stream, str) else stream.read()
    reader = csv.reader(io.StringIO(text, newline=""))
    out = []
    try:
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["student_id", "percentage"]:
            raise ParseError("expected header student_id,percentage", source=source, line=1)
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", source=source, line=reader.line_num)
            pct = to_decimal(row[1], "percentage", source=source, line=reader.line_num)
            if not (0 <= pct <= 100):
                raise ValidationError(f"line {reader.line_num}: percentage {row[1]} outside [0, 100]", code="RANGE")
            out.append((row[0], pct))
    except csv.Error as exc:
        raise ParseError(str(exc), source=source, line=reader.line_num) from None
    return out
