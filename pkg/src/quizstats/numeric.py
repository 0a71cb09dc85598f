"""Display rounding shared by reports."""

from __future__ import annotations

from decimal import ROUND_HALF_UP, Decimal, localcontext
from fractions import Fraction
from numbers import Real
from typing import Optional


def _as_decimal(value) -> Decimal:
    if isinstance(value, Decimal):
        return value
    if isinstance(value, Fraction):
        with localcontext() as ctx:
            ctx.prec = 40
            return Decimal(value.numerator) / Decimal(value.denominator)
    if isinstance(value, int):
        return Decimal(value)
    # shortest repr: a float parsed from "73.665" rounds as 73.665, not 73.66499...
    return Decimal(repr(float(value)))


def round_half_up(value: Real, places: int = 2) -> Decimal:
    quantum = Decimal(1).scaleb(-places)
    with localcontext() as ctx:
        ctx.prec = 40
        return _as_decimal(value).quantize(quantum, rounding=ROUND_HALF_UP)


def display(value: Optional[Real], places: int = 2) -> Optional[str]:
    """Fixed-point string rounded half-up, or None for an undefined value."""
    if value is None:
        return None
    rounded = round_half_up(value, places)
    if rounded == 0:
        rounded = abs(rounded)
    return format(rounded, "f")
