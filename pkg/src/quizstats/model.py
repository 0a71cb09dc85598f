"""Domain types, input formats and attempt selection.

Scores are kept as :class:`~decimal.Decimal` from the moment they are read
so that totals such as 22/30 produce the same percentages on every run;
floating point only appears once a :class:`ResponseMatrix` is built for the
statistics code.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from datetime import datetime
from decimal import Decimal, InvalidOperation
from enum import Enum
from fractions import Fraction
from typing import IO, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import ParseError, ValidationError

NO_RESPONSE = None  # marker stored in AttemptRecord.item_responses

TextInput = Union[str, IO[str]]

QUIZ_CSV_HEADER = ("item_id", "max_score", "option_id", "credit_fraction", "text")


@dataclass(frozen=True)
class Option:
    option_id: str
    credit_fraction: Decimal

    def __post_init__(self):
        if not (0 <= self.credit_fraction <= 1):
            raise ValidationError(
                f"option {self.option_id!r}: credit_fraction {self.credit_fraction} outside [0, 1]"
            )


@dataclass(frozen=True)
class Item:
    item_id: str
    max_score: Decimal
    options: tuple[Option, ...] = ()
    text: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))
        if self.max_score <= 0:
            raise ValidationError(f"item {self.item_id!r}: max_score must be > 0, got {self.max_score}")
        seen = set()
        for opt in self.options:
            if opt.option_id in seen:
                raise ValidationError(f"item {self.item_id!r}: duplicate option_id {opt.option_id!r}")
            seen.add(opt.option_id)
        if self.options and not any(o.credit_fraction == 1 for o in self.options):
            raise ValidationError(f"item {self.item_id!r}: no option carries full credit")

    def option(self, option_id: str) -> Optional[Option]:
        for opt in self.options:
            if opt.option_id == option_id:
                return opt
        return None


@dataclass(frozen=True)
class Quiz:
    quiz_id: str
    items: tuple[Item, ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if not self.items:
            raise ValidationError(f"quiz {self.quiz_id!r} has no items")
        seen = set()
        for item in self.items:
            if item.item_id in seen:
                raise ValidationError(f"duplicate item_id {item.item_id!r}", code="SEMANTIC")
            seen.add(item.item_id)

    @property
    def item_ids(self) -> tuple[str, ...]:
        return tuple(item.item_id for item in self.items)

    @property
    def total_max_score(self) -> Decimal:
        return sum((item.max_score for item in self.items), Decimal(0))

    def item(self, item_id: str) -> Item:
        for item in self.items:
            if item.item_id == item_id:
                return item
        raise ValidationError(f"unknown item {item_id!r}", code="UNKNOWN_ITEM")


@dataclass(frozen=True)
class AttemptRecord:
    student_id: str
    attempt_number: int
    item_scores: Mapping[str, Decimal]
    item_responses: Mapping[str, Optional[str]] = field(default_factory=dict)
    timestamp: Optional[datetime] = None

    @property
    def total(self) -> Decimal:
        return sum(self.item_scores.values(), Decimal(0))


class AttemptPolicy(Enum):
    FIRST = "first"
    LAST = "last"
    ALL = "all"
    HIGHEST = "highest"


@dataclass(frozen=True, eq=False)
class ResponseMatrix:
    """Students x items score table produced by :func:`select_attempts`.

    ``cells`` holds fractional scores (earned / max_score) and ``points``
    the same data in points.  ``units`` is ``points`` rescaled to integers
    (``points * 10**scale``) so column sums and rest-of-test differences
    stay exact; covariance-based statistics are computed from it.
    """

    student_rows: tuple[tuple[str, int], ...]
    item_columns: tuple[str, ...]
    cells: np.ndarray
    points: np.ndarray
    units: np.ndarray
    scale: int
    max_scores: tuple[Decimal, ...]
    totals: tuple[Decimal, ...]
    responses: tuple[tuple[Optional[str], ...], ...]

    @property
    def n_rows(self) -> int:
        return len(self.student_rows)

    @property
    def n_items(self) -> int:
        return len(self.item_columns)

    @property
    def max_total(self) -> Decimal:
        return sum(self.max_scores, Decimal(0))

    def column_index(self, item_id: str) -> int:
        try:
            return self.item_columns.index(item_id)
        except ValueError:
            raise ValidationError(f"unknown item {item_id!r}", code="UNKNOWN_ITEM") from None

    def total_percentages(self) -> list[Fraction]:
        """Exact total percentage of each row."""
        max_total = Fraction(self.max_total)
        return [Fraction(t) * 100 / max_total for t in self.totals]

    def __eq__(self, other):
        if not isinstance(other, ResponseMatrix):
            return NotImplemented
        return (
            self.student_rows == other.student_rows
            and self.item_columns == other.item_columns
            and self.max_scores == other.max_scores
            and self.totals == other.totals
            and self.responses == other.responses
            and np.array_equal(self.cells, other.cells)
            and np.array_equal(self.points, other.points)
        )

    __hash__ = None


@dataclass(frozen=True)
class Finding:
    kind: str
    subject: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...] = ()

    @property
    def clean(self) -> bool:
        return not self.findings


# --------------------------------------------------------------------------
# parsing helpers


def _read_text(stream: TextInput) -> str:
    if isinstance(stream, str):
        return stream
    return stream.read()


def to_decimal(value, where: str, *, source: Optional[str] = None, line: Optional[int] = None) -> Decimal:
    if isinstance(value, bool):
        raise ParseError(f"{where}: expected a decimal, got {value!r}", source=source, line=line)
    if isinstance(value, Decimal):
        d = value
    elif isinstance(value, int):
        d = Decimal(value)
    elif isinstance(value, str):
        try:
            d = Decimal(value.strip())
        except InvalidOperation:
            raise ParseError(f"{where}: not a decimal number: {value!r}", source=source, line=line) from None
    else:
        raise ParseError(f"{where}: expected a decimal string, got {type(value).__name__}", source=source, line=line)
    if not d.is_finite():
        raise ParseError(f"{where}: not a finite number: {value!r}", source=source, line=line)
    return d


def format_decimal(d: Decimal) -> str:
    text = format(d, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text or "0"


def _decimal_places(d: Decimal) -> int:
    exp = d.normalize().as_tuple().exponent
    return -exp if isinstance(exp, int) and exp < 0 else 0


# --------------------------------------------------------------------------
# quiz documents


def parse_quiz(stream: TextInput, format: str = "json", *, source: Optional[str] = None) -> Quiz:
    """Read a quiz definition in ``json`` or ``csv`` form."""
    text = _read_text(stream)
    fmt = format.lower()
    if fmt in ("json", "quiz_json"):
        return _parse_quiz_json(text, source)
    if fmt in ("csv", "quiz_csv"):
        return _parse_quiz_csv(text, source)
    raise ValueError(f"unknown quiz format {format!r}")


def _parse_quiz_json(text: str, source: Optional[str]) -> Quiz:
    try:
        doc = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, source=source, line=exc.lineno, column=exc.colno) from None
    if not isinstance(doc, dict):
        raise ParseError("quiz document must be a JSON object", source=source)
    quiz_id = doc.get("quiz_id")
    if not isinstance(quiz_id, str):
        raise ParseError("quiz_id must be a string", source=source)
    raw_items = doc.get("items")
    if not isinstance(raw_items, list):
        raise ParseError("items must be a list", source=source)

    items = []
    for i, raw in enumerate(raw_items):
        where = f"items[{i}]"
        if not isinstance(raw, dict):
            raise ParseError(f"{where} must be an object", source=source)
        item_id = raw.get("item_id")
        if not isinstance(item_id, str):
            raise ParseError(f"{where}.item_id must be a string", source=source)
        max_score = to_decimal(raw.get("max_score"), f"{where}.max_score", source=source)
        raw_options = raw.get("options", [])
        if not isinstance(raw_options, list):
            raise ParseError(f"{where}.options must be a list", source=source)
        options = []
        for j, ro in enumerate(raw_options):
            ow = f"{where}.options[{j}]"
            if not isinstance(ro, dict) or not isinstance(ro.get("option_id"), str):
                raise ParseError(f"{ow} must be an object with a string option_id", source=source)
            credit = to_decimal(ro.get("credit_fraction"), f"{ow}.credit_fraction", source=source)
            options.append(Option(ro["option_id"], credit))
        item_text = raw.get("text")
        if item_text is not None and not isinstance(item_text, str):
            raise ParseError(f"{where}.text must be a string", source=source)
        items.append(Item(item_id, max_score, tuple(options), item_text))
    return Quiz(quiz_id, tuple(items))


def _parse_quiz_csv(text: str, source: Optional[str]) -> Quiz:
    """Long format: one row per option, items in contiguous row groups.

    The quiz id is taken from an optional leading ``# quiz_id: <id>`` line.
    """
    lines = text.splitlines(keepends=True)
    quiz_id = ""
    offset = 0
    if lines and lines[0].startswith("#"):
        head = lines[0].lstrip("#").strip()
        if head.startswith("quiz_id:"):
            quiz_id = head[len("quiz_id:"):].strip()
        offset = 1
    reader = csv.reader(io.StringIO("".join(lines[offset:]), newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty quiz CSV", source=source, line=1 + offset) from None
    except csv.Error as exc:
        raise ParseError(str(exc), source=source, line=reader.line_num + offset) from None
    if tuple(h.strip() for h in header) != QUIZ_CSV_HEADER:
        raise ParseError(f"expected header {','.join(QUIZ_CSV_HEADER)}", source=source, line=1 + offset)

    groups: dict[str, dict] = {}
    order: list[str] = []
    last_id = None
    try:
        for row in reader:
            line = reader.line_num + offset
            if not row:
                continue
            if len(row) != len(QUIZ_CSV_HEADER):
                raise ParseError(f"expected {len(QUIZ_CSV_HEADER)} fields, got {len(row)}", source=source, line=line)
            item_id, max_score, option_id, credit, item_text = row
            score = to_decimal(max_score, "max_score", source=source, line=line)
            if item_id != last_id and item_id in groups:
                raise ValidationError(f"duplicate item_id {item_id!r} (line {line})")
            group = groups.setdefault(item_id, {"max_score": score, "options": [], "text": None})
            if item_id != last_id:
                order.append(item_id)
            elif group["max_score"] != score:
                raise ValidationError(f"item {item_id!r}: inconsistent max_score (line {line})")
            last_id = item_id
            if item_text:
                group["text"] = item_text
            if option_id:
                group["options"].append(Option(option_id, to_decimal(credit, "credit_fraction", source=source, line=line)))
    except csv.Error as exc:
        raise ParseError(str(exc), source=source, line=reader.line_num + offset) from None

    items = tuple(
        Item(iid, groups[iid]["max_score"], tuple(groups[iid]["options"]), groups[iid]["text"]) for iid in order
    )
    return Quiz(quiz_id, items)


def serialize_quiz(quiz: Quiz, format: str = "json") -> str:
    fmt = format.lower()
    if fmt in ("json", "quiz_json"):
        doc = {"quiz_id": quiz.quiz_id, "items": []}
        for item in quiz.items:
            entry = {
                "item_id": item.item_id,
                "max_score": format_decimal(item.max_score),
                "options": [
                    {"option_id": o.option_id, "credit_fraction": format_decimal(o.credit_fraction)}
                    for o in item.options
                ],
            }
            if item.text is not None:
                entry["text"] = item.text
            doc["items"].append(entry)
        return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
    if fmt in ("csv", "quiz_csv"):
        buf = io.StringIO()
        buf.write(f"# quiz_id: {quiz.quiz_id}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(QUIZ_CSV_HEADER)
        for item in quiz.items:
            text = item.text or ""
            if not item.options:
                writer.writerow([item.item_id, format_decimal(item.max_score), "", "", text])
            for k, opt in enumerate(item.options):
                writer.writerow([
                    item.item_id,
                    format_decimal(item.max_score),
                    opt.option_id,
                    format_decimal(opt.credit_fraction),
                    text if k == 0 else "",
                ])
        return buf.getvalue()
    raise ValueError(f"unknown quiz format {format!r}")


# --------------------------------------------------------------------------
# attempt exports


def parse_attempts(stream: TextInput, quiz: Quiz, *, source: Optional[str] = None) -> list[AttemptRecord]:
    """Read the attempts CSV (``student_id,attempt_number,timestamp,<id>_score,<id>_response``).

    Item columns may be absent; their scores default to 0 with no response.
    """
    text = _read_text(stream)
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty attempts CSV", source=source, line=1) from None
    except csv.Error as exc:
        raise ParseError(str(exc), source=source, line=reader.line_num) from None

    known = {item.item_id: item for item in quiz.items}
    score_cols: dict[str, int] = {}
    response_cols: dict[str, int] = {}
    fixed: dict[str, int] = {}
    for idx, name in enumerate(header):
        if name in ("student_id", "attempt_number", "timestamp"):
            if name in fixed:
                raise ParseError(f"duplicate column {name!r}", source=source, line=1)
            fixed[name] = idx
            continue
        for suffix, target in (("_score", score_cols), ("_response", response_cols)):
            if name.endswith(suffix):
                item_id = name[: -len(suffix)]
                if item_id not in known:
                    raise ValidationError(
                        f"column {name!r} refers to item {item_id!r} which is not in the quiz",
                        code="UNKNOWN_ITEM",
                    )
                if item_id in target:
                    raise ParseError(f"duplicate column {name!r}", source=source, line=1)
                target[item_id] = idx
                break
        else:
            raise ParseError(f"unexpected column {name!r}", source=source, line=1)
    for required in ("student_id", "attempt_number"):
        if required not in fixed:
            raise ParseError(f"missing required column {required!r}", source=source, line=1)

    records: list[AttemptRecord] = []
    seen: set[tuple[str, int]] = set()
    try:
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", source=source, line=line)
            student = row[fixed["student_id"]]
            if not student:
                raise ParseError("empty student_id", source=source, line=line)
            raw_num = row[fixed["attempt_number"]].strip()
            try:
                number = int(raw_num)
            except ValueError:
                raise ParseError(f"attempt_number is not an integer: {raw_num!r}", source=source, line=line) from None
            if number < 1:
                raise ParseError(f"attempt_number must be positive, got {number}", source=source, line=line)
            stamp = None
            if "timestamp" in fixed and row[fixed["timestamp"]].strip():
                raw_ts = row[fixed["timestamp"]].strip()
                try:
                    stamp = datetime.fromisoformat(raw_ts.replace("Z", "+00:00"))
                except ValueError:
                    raise ParseError(f"bad timestamp {raw_ts!r}", source=source, line=line) from None
            key = (student, number)
            if key in seen:
                raise ValidationError(
                    f"student {student!r} attempt {number} appears twice (line {line})", code="DUPLICATE_ATTEMPT"
                )
            seen.add(key)

            scores: dict[str, Decimal] = {}
            responses: dict[str, Optional[str]] = {}
            for item in quiz.items:
                iid = item.item_id
                raw_score = row[score_cols[iid]].strip() if iid in score_cols else ""
                score = to_decimal(raw_score, f"{iid}_score", source=source, line=line) if raw_score else Decimal(0)
                if score < 0 or score > item.max_score:
                    raise ValidationError(
                        f"line {line}: score {raw_score} for {iid!r} outside [0, {format_decimal(item.max_score)}]",
                        code="SCORE_RANGE",
                    )
                response = row[response_cols[iid]] if iid in response_cols else ""
                if response == "":
                    response = NO_RESPONSE
                elif item.options and item.option(response) is None:
                    raise ValidationError(
                        f"line {line}: response {response!r} is not an option of {iid!r}", code="UNKNOWN_OPTION"
                    )
                scores[iid] = score
                responses[iid] = response
            records.append(AttemptRecord(student, number, scores, responses, stamp))
    except csv.Error as exc:
        raise ParseError(str(exc), source=source, line=reader.line_num) from None
    return records


def serialize_attempts(attempts: Iterable[AttemptRecord], quiz: Quiz) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["student_id", "attempt_number", "timestamp"]
    for iid in quiz.item_ids:
        header += [f"{iid}_score", f"{iid}_response"]
    writer.writerow(header)
    for rec in attempts:
        row = [rec.student_id, str(rec.attempt_number), rec.timestamp.isoformat() if rec.timestamp else ""]
        for iid in quiz.item_ids:
            response = rec.item_responses.get(iid, NO_RESPONSE)
            row += [format_decimal(rec.item_scores.get(iid, Decimal(0))), "" if response is None else response]
        writer.writerow(row)
    return buf.getvalue()


# --------------------------------------------------------------------------
# attempt selection


def select_attempts(attempts: Sequence[AttemptRecord], policy: AttemptPolicy, quiz: Quiz) -> ResponseMatrix:
    return build_matrix(select_records(attempts, policy), quiz)


def select_records(attempts: Sequence[AttemptRecord], policy: AttemptPolicy) -> list[AttemptRecord]:
    """The records :func:`select_attempts` keeps, in matrix row order."""
    if not attempts:
        raise ValidationError("no attempts to analyse", code="EMPTY")
    policy = AttemptPolicy(policy)

    by_student: dict[str, list[AttemptRecord]] = {}
    for rec in attempts:
        by_student.setdefault(rec.student_id, []).append(rec)

    chosen: list[AttemptRecord] = []
    for student in sorted(by_student):
        recs = sorted(by_student[student], key=lambda r: r.attempt_number)
        if policy is AttemptPolicy.ALL:
            chosen.extend(recs)
        elif policy is AttemptPolicy.FIRST:
            chosen.append(recs[0])
        elif policy is AttemptPolicy.LAST:
            chosen.append(recs[-1])
        else:
            # max() keeps the first maximum, i.e. the lowest attempt number
            chosen.append(max(recs, key=lambda r: r.total))
    return chosen


def build_matrix(records: Sequence[AttemptRecord], quiz: Quiz) -> ResponseMatrix:
    """Tabulate records in the given order (no policy applied)."""
    item_ids = quiz.item_ids
    max_scores = tuple(item.max_score for item in quiz.items)
    zero = Decimal(0)
    table = [[rec.item_scores.get(iid, zero) for iid in item_ids] for rec in records]

    distinct = set(max_scores)
    for row in table:
        distinct.update(row)
    scale = max(_decimal_places(d) for d in distinct)
    factor = Decimal(10) ** scale
    units = np.array([[int(d * factor) for d in row] for row in table], dtype=np.float64).reshape(
        len(records), len(item_ids)
    )
    max_units = np.array([int(d * factor) for d in max_scores], dtype=np.float64)
    points = units / float(factor)
    cells = units / max_units

    return ResponseMatrix(
        student_rows=tuple((rec.student_id, rec.attempt_number) for rec in records),
        item_columns=item_ids,
        cells=cells,
        points=points,
        units=units,
        scale=scale,
        max_scores=max_scores,
        totals=tuple(sum(row, zero) for row in table),
        responses=tuple(tuple(rec.item_responses.get(iid, NO_RESPONSE) for iid in item_ids) for rec in records),
    )


# --------------------------------------------------------------------------
# validation


def validate(quiz: Quiz, attempts: Sequence[AttemptRecord], roster: Optional[Iterable[str]] = None) -> ValidationReport:
    """Collect data-quality findings; never raises."""
    findings: list[Finding] = []
    known = {item.item_id: item for item in quiz.items}

    seen: set[tuple[str, int]] = set()
    for rec in attempts:
        key = (rec.student_id, rec.attempt_number)
        if key in seen:
            findings.append(Finding("DUPLICATE_ATTEMPT", rec.student_id, f"attempt {rec.attempt_number} repeated"))
        seen.add(key)
        for iid, score in rec.item_scores.items():
            item = known.get(iid)
            if item is None:
                findings.append(Finding("UNKNOWN_ITEM", iid, f"referenced by {rec.student_id} #{rec.attempt_number}"))
            elif not (0 <= score <= item.max_score):
                findings.append(
                    Finding("SCORE_RANGE", iid, f"{rec.student_id} #{rec.attempt_number} scored {format_decimal(score)}")
                )

    if roster is not None:
        present = {rec.student_id for rec in attempts}
        for student in roster:
            if student not in present:
                findings.append(Finding("MISSING_STUDENT", student, "on roster but has no attempts"))

    if attempts:
        for item in quiz.items:
            iid = item.item_id
            scores = [rec.item_scores.get(iid, Decimal(0)) for rec in attempts]
            answered = any(rec.item_responses.get(iid) is not None for rec in attempts) or any(scores)
            if not answered:
                findings.append(Finding("UNANSWERED_ITEM", iid, "no attempt responded to this item"))
            elif len(attempts) >= 2 and len(set(scores)) == 1:
                findings.append(Finding("ZERO_VARIANCE_ITEM", iid, f"every attempt scored {format_decimal(scores[0])}"))

        totals: dict[str, Decimal] = {}
        for rec in attempts:
            totals[rec.student_id] = max(totals.get(rec.student_id, Decimal(0)), rec.total)
        for student in sorted(totals):
            if totals[student] == 0:
                findings.append(Finding("ZERO_TOTAL_STUDENT", student, "every attempt totals 0 points"))

    return ValidationReport(tuple(findings))
