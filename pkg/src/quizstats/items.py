"""Per-item classical test theory indices.

All covariance-type quantities use the sample (n - 1) estimator and are
computed on the matrix's integer ``units`` so that rest-of-test columns
(total minus the item) are exact.  Degenerate cases (constant columns)
give ``None`` rather than raising, so one bad item never aborts a whole
analysis.  Items are analysed on points, not fractions: a 5-point item
pulls on the total five times as hard as a 1-point one.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import ValidationError
from .model import Item, Quiz, ResponseMatrix
from .numeric import round_half_up

_SNAP = 9  # decimal places kept before band lookup; absorbs float noise at boundaries


class FacilityBand(Enum):
    EXTREMELY_DIFFICULT_OR_BROKEN = "Extremely difficult or something wrong with the question"
    VERY_DIFFICULT = "Very difficult"
    DIFFICULT = "Difficult"
    MODERATELY_DIFFICULT = "Moderately difficult"
    ABOUT_RIGHT = "About right for the average student"
    FAIRLY_EASY = "Fairly easy"
    EASY = "Easy"
    VERY_EASY = "Very easy"
    EXTREMELY_EASY = "Extremely easy"


class DiscriminationBand(Enum):
    PROBABLY_INVALID = "Probably invalid question"
    VERY_WEAK = "Very weak"
    WEAK = "Weak"
    ADEQUATE = "Adequate"
    VERY_GOOD = "Very good"


# upper inclusive bound on the rounded facility index
_FACILITY_BINS = (
    (5, FacilityBand.EXTREMELY_DIFFICULT_OR_BROKEN),
    (10, FacilityBand.VERY_DIFFICULT),
    (20, FacilityBand.DIFFICULT),
    (34, FacilityBand.MODERATELY_DIFFICULT),
    (65, FacilityBand.ABOUT_RIGHT),  # 35 is missing from the source table; it is placed here
    (80, FacilityBand.FAIRLY_EASY),
    (89, FacilityBand.EASY),
    (94, FacilityBand.VERY_EASY),
    (100, FacilityBand.EXTREMELY_EASY),
)


def classify_facility(facility: float) -> FacilityBand:
    if not (-1e-9 <= facility <= 100 + 1e-9):
        raise ValidationError(f"facility index {facility} outside [0, 100]", code="RANGE")
    rounded = int(round_half_up(round_half_up(facility, _SNAP), 0))
    for upper, band in _FACILITY_BINS:
        if rounded <= upper:
            return band
    raise AssertionError("unreachable")


def classify_discrimination(r: float) -> DiscriminationBand:
    if not (-100 - 1e-9 <= r <= 100 + 1e-9):
        raise ValidationError(f"discrimination index {r} outside [-100, 100]", code="RANGE")
    value = round_half_up(r, _SNAP)
    if value <= 0:
        return DiscriminationBand.PROBABLY_INVALID
    if value < 20:
        return DiscriminationBand.VERY_WEAK
    if value < 30:
        return DiscriminationBand.WEAK
    if value < 50:
        return DiscriminationBand.ADEQUATE
    return DiscriminationBand.VERY_GOOD


@dataclass(frozen=True)
class ItemStatistics:
    item_id: str
    attempts_count: int
    facility_index: float
    std_dev_pct: float
    random_guess_pct: Optional[float]
    intended_weight_pct: float
    effective_weight: Optional[float]
    discrimination_index: Optional[float]
    discrimination_efficiency: Optional[float]
    facility_band: FacilityBand
    discrimination_band: Optional[DiscriminationBand]


# --------------------------------------------------------------------------
# helpers


def _require_rows(matrix: ResponseMatrix, n: int):
    if matrix.n_rows < n:
        if n == 1:
            raise ValidationError("matrix has no rows", code="EMPTY")
        raise ValidationError(f"need at least {n} rows, got {matrix.n_rows}", code="TOO_FEW_ROWS")


def _is_constant(col: np.ndarray) -> bool:
    return bool(np.all(col == col[0]))


def _cov(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a - a.mean(), b - b.mean()) / (len(a) - 1))


def _pearson(a: np.ndarray, b: np.ndarray) -> Optional[float]:
    if _is_constant(a) or _is_constant(b):
        return None
    ac = a - a.mean()
    bc = b - b.mean()
    r = float(np.dot(ac, bc) / np.sqrt(np.dot(ac, ac) * np.dot(bc, bc)))
    return max(-1.0, min(1.0, r))


def _item_and_rest(matrix: ResponseMatrix, item_id: str) -> tuple[np.ndarray, np.ndarray]:
    j = matrix.column_index(item_id)
    x = matrix.units[:, j]
    return x, matrix.units.sum(axis=1) - x


# --------------------------------------------------------------------------
# indices


def facility_index(matrix: ResponseMatrix, item_id: str) -> float:
    """Mean fractional score on the item, as a percentage."""
    j = matrix.column_index(item_id)
    _require_rows(matrix, 1)
    return 100.0 * float(matrix.cells[:, j].mean())


def item_std_dev(matrix: ResponseMatrix, item_id: str) -> float:
    j = matrix.column_index(item_id)
    _require_rows(matrix, 2)
    col = matrix.cells[:, j]
    if _is_constant(col):
        return 0.0
    return 100.0 * float(np.std(col, ddof=1))


def random_guess_score(item: Item) -> float:
    """Expected percentage from picking one option uniformly at random."""
    if not item.options:
        raise ValidationError(f"item {item.item_id!r} has no options", code="NO_OPTIONS")
    total = sum(Fraction(o.credit_fraction) for o in item.options)
    return float(100 * total / len(item.options))


def intended_weight(quiz: Quiz, item_id: str) -> float:
    item = quiz.item(item_id)
    return float(100 * Fraction(item.max_score) / Fraction(quiz.total_max_score))


def effective_weights(matrix: ResponseMatrix, quiz: Quiz) -> dict[str, Optional[float]]:
    """Each item's share of the total-score variance, ``cov(item, total) / var(total)``.

    Items whose covariance with the total is negative get ``None`` and are
    left out of the normalising sum.
    """
    _require_rows(matrix, 2)
    units = matrix.units
    total = units.sum(axis=1)
    centered = units - units.mean(axis=0)
    tc = total - total.mean()
    cov = centered.T @ tc / (matrix.n_rows - 1)
    # float noise around an exact zero must not flip an item to "negative"
    spread = np.sqrt(np.einsum("ij,ij->j", centered, centered) * float(tc @ tc)) / (matrix.n_rows - 1)
    cov = np.where(np.abs(cov) <= 1e-12 * spread, 0.0, cov)

    nonneg = cov >= 0
    denom = float(cov[nonneg].sum())
    out: dict[str, Optional[float]] = {}
    for j, iid in enumerate(matrix.item_columns):
        if not nonneg[j] or denom <= 0:
            out[iid] = None
        else:
            out[iid] = 100.0 * (float(cov[j]) / denom)
    return {iid: out[iid] for iid in quiz.item_ids if iid in out}


def discrimination_index(matrix: ResponseMatrix, item_id: str) -> Optional[float]:
    """Correlation (x100) of item points with the rest-of-test points."""
    x, rest = _item_and_rest(matrix, item_id)
    _require_rows(matrix, 2)
    r = _pearson(x, rest)
    return None if r is None else 100.0 * r


def discrimination_efficiency(matrix: ResponseMatrix, item_id: str) -> Optional[float]:
    """Item/rest covariance as a percentage of the largest covariance the
    same two score distributions could reach under any pairing of rows.

    Sorting both columns ascending gives that maximum (rearrangement
    inequality), so the result never exceeds 100.
    """
    x, rest = _item_and_rest(matrix, item_id)
    _require_rows(matrix, 2)
    if _is_constant(x) or _is_constant(rest):
        return None
    best = _cov(np.sort(x), np.sort(rest))
    if best <= 0:
        return None
    return min(100.0, 100.0 * _cov(x, rest) / best)


def analyze_items(quiz: Quiz, matrix: ResponseMatrix) -> list[ItemStatistics]:
    """All indices for every item, in quiz order."""
    _require_rows(matrix, 2)
    weights = effective_weights(matrix, quiz)
    out = []
    for item in quiz.items:
        iid = item.item_id
        f = facility_index(matrix, iid)
        r = discrimination_index(matrix, iid)
        out.append(ItemStatistics(
            item_id=iid,
            attempts_count=matrix.n_rows,
            facility_index=f,
            std_dev_pct=item_std_dev(matrix, iid),
            random_guess_pct=random_guess_score(item) if item.options else None,
            intended_weight_pct=intended_weight(quiz, iid),
            effective_weight=weights.get(iid),
            discrimination_index=r,
            discrimination_efficiency=discrimination_efficiency(matrix, iid),
            facility_band=classify_facility(f),
            discrimination_band=None if r is None else classify_discrimination(r),
        ))
    return out
