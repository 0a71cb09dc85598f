"""Quality flags for questions and per-question response breakdowns."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, fields
from decimal import Decimal
from enum import Enum
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ParseError, ValidationError
from .items import ItemStatistics, _pearson
from .model import Item, ResponseMatrix, TextInput
from .numeric import round_half_up


@dataclass(frozen=True)
class FlagThresholds:
    min_std_dev_pct: float = 33.0
    min_disc_efficiency_pct: float = 50.0
    weight_mismatch_pct: float = 5.0  # no published cutoff; tune per course
    low_facility_pct: float = 5.0
    invalid_discrimination_pct: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (0 <= value <= 100):
                raise ValidationError(f"threshold {f.name}={value} outside [0, 100]")


def parse_thresholds(stream: TextInput, *, source: Optional[str] = None) -> FlagThresholds:
    text = stream if isinstance(stream, str) else stream.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, source=source, line=exc.lineno, column=exc.colno) from None
    if not isinstance(doc, dict):
        raise ParseError("thresholds document must be a JSON object", source=source)
    names = {f.name for f in fields(FlagThresholds)}
    unknown = sorted(set(doc) - names)
    if unknown:
        raise ParseError(f"unknown threshold(s): {', '.join(unknown)}", source=source)
    values = {}
    for key, value in doc.items():
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise ParseError(f"threshold {key} must be a number", source=source)
        try:
            values[key] = float(value)
        except ValueError:
            raise ParseError(f"threshold {key} must be a number", source=source) from None
    return FlagThresholds(**values)


class FlagKind(Enum):
    LOW_SPREAD = "LOW_SPREAD"
    LOW_DISC_EFFICIENCY = "LOW_DISC_EFFICIENCY"
    INVALID_DISCRIMINATION = "INVALID_DISCRIMINATION"
    EXTREME_FACILITY_LOW = "EXTREME_FACILITY_LOW"
    WEIGHT_MISMATCH = "WEIGHT_MISMATCH"
    UNDEFINED_STATISTIC = "UNDEFINED_STATISTIC"


class Diagnosis(Enum):
    """Reasons an instructor may record against a flagged item.

    Never assigned automatically.
    """

    NEEDS_TEACHING_TIME = "Correct question, but the material needs more class time"
    INCORRECT_ANSWER_OPTIONS = "Incorrectly formulated possible answers"
    WEAK_DISTRACTORS = "Poorly worded wrong answers"
    TERMINOLOGY = "Terminology needs refinement"


@dataclass(frozen=True)
class ItemFlag:
    item_id: str
    flag_kind: FlagKind
    detail: str


def _fmt(value: float) -> str:
    return format(round_half_up(value, 2), "f")


def _item_flags(s: ItemStatistics, t: FlagThresholds) -> list[ItemFlag]:
    flags = []
    if s.std_dev_pct < t.min_std_dev_pct:
        flags.append(ItemFlag(s.item_id, FlagKind.LOW_SPREAD, f"SD {_fmt(s.std_dev_pct)} < {_fmt(t.min_std_dev_pct)}"))
    de = s.discrimination_efficiency
    if de is not None and de < t.min_disc_efficiency_pct:
        flags.append(ItemFlag(
            s.item_id, FlagKind.LOW_DISC_EFFICIENCY, f"DE {_fmt(de)} < {_fmt(t.min_disc_efficiency_pct)}"
        ))
    r = s.discrimination_index
    if r is not None and r <= t.invalid_discrimination_pct:
        flags.append(ItemFlag(
            s.item_id, FlagKind.INVALID_DISCRIMINATION, f"R {_fmt(r)} <= {_fmt(t.invalid_discrimination_pct)}"
        ))
    rounded_f = round_half_up(round_half_up(s.facility_index, 9), 0)
    if rounded_f <= Decimal(repr(t.low_facility_pct)):
        flags.append(ItemFlag(
            s.item_id, FlagKind.EXTREME_FACILITY_LOW, f"F {rounded_f} <= {_fmt(t.low_facility_pct)}"
        ))
    ew = s.effective_weight
    if ew is not None and abs(ew - s.intended_weight_pct) > t.weight_mismatch_pct:
        flags.append(ItemFlag(
            s.item_id,
            FlagKind.WEIGHT_MISMATCH,
            f"EW {_fmt(ew)} vs IW {_fmt(s.intended_weight_pct)} (tolerance {_fmt(t.weight_mismatch_pct)})",
        ))
    missing = [
        name
        for name, value in (("R", r), ("DE", de), ("EW", ew))
        if value is None
    ]
    if missing:
        flags.append(ItemFlag(s.item_id, FlagKind.UNDEFINED_STATISTIC, "undefined: " + ", ".join(missing)))
    return flags


def flag_items(stats: Sequence[ItemStatistics], thresholds: FlagThresholds = FlagThresholds()) -> list[ItemFlag]:
    """Apply every quality rule to every item; an item may collect several flags."""
    out = []
    for s in stats:
        out.extend(_item_flags(s, thresholds))
    return out


# --------------------------------------------------------------------------
# response breakdown


class Credit(Enum):
    FULL = "FULL"
    PARTIAL = "PARTIAL"
    ZERO = "ZERO"


@dataclass(frozen=True)
class ResponseRow:
    response: Optional[str]
    credited: Credit
    count: int
    percent: float


@dataclass(frozen=True)
class ResponseBreakdown:
    item_id: str
    rows: tuple[ResponseRow, ...]
    option_discrimination: Mapping[str, Optional[float]]


def _credit_of(fraction) -> Credit:
    if fraction == 1:
        return Credit.FULL
    if fraction == 0:
        return Credit.ZERO
    return Credit.PARTIAL


def response_breakdown(matrix: ResponseMatrix, item: Item) -> ResponseBreakdown:
    """Tally the responses given to ``item`` across the matrix rows.

    Options are listed in quiz order, other free responses alphabetically,
    and no-response last.  Credit for a free response (or a blank) comes
    from the scores those rows actually earned.  Option discrimination is
    the correlation (x100) between choosing the option and the
    rest-of-test score.
    """
    j = matrix.column_index(item.item_id)
    n = matrix.n_rows
    if n == 0:
        raise ValidationError("matrix has no rows", code="EMPTY")
    responses = [row[j] for row in matrix.responses]
    counts = Counter(responses)

    option_order = {o.option_id: k for k, o in enumerate(item.options)}

    def order(resp):
        if resp is None:
            return (2, 0, "")
        if resp in option_order:
            return (0, option_order[resp], "")
        return (1, 0, resp)

    cells = matrix.cells[:, j]
    rows = []
    for resp in sorted(counts, key=order):
        opt = item.option(resp) if resp is not None else None
        if opt is not None:
            credited = _credit_of(opt.credit_fraction)
        else:
            earned = {float(cells[k]) for k, r in enumerate(responses) if r == resp}
            credited = _credit_of(earned.pop()) if len(earned) == 1 else Credit.PARTIAL
        rows.append(ResponseRow(resp, credited, counts[resp], 100.0 * counts[resp] / n))

    x = matrix.units[:, j]
    rest = matrix.units.sum(axis=1) - x
    disc: dict[str, Optional[float]] = {}
    if n >= 2:
        chosen = np.array(responses, dtype=object)
        for opt in item.options:
            indicator = (chosen == opt.option_id).astype(np.float64)
            r = _pearson(indicator, rest)
            disc[opt.option_id] = None if r is None else 100.0 * r
    else:
        disc = {opt.option_id: None for opt in item.options}
    return ResponseBreakdown(item.item_id, tuple(rows), disc)
