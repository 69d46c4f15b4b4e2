"""Half-up decimal rounding for report values.

Report tables round half-up (0.5 goes away from zero), not banker's style,
so printed numbers match hand arithmetic. Means are taken in decimal
arithmetic over the values' shortest decimal representations; plain float
summation would turn a true 30.15 into 30.149999... and round the wrong way.
"""

from __future__ import annotations

from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable


def _quantum(ndigits: int) -> Decimal:
    return Decimal(1).scaleb(-ndigits)


def round_half_up(value: float, ndigits: int) -> float:
    return float(Decimal(str(value)).quantize(_quantum(ndigits), rounding=ROUND_HALF_UP))


def format_half_up(value: float, ndigits: int) -> str:
    return str(Decimal(str(value)).quantize(_quantum(ndigits), rounding=ROUND_HALF_UP))


def decimal_mean(values: Iterable[float], ndigits: int) -> float:
    items = [Decimal(str(v)) for v in values]
    if not items:
        raise ValueError("mean of no values")
    mean = sum(items) / len(items)
    return float(mean.quantize(_quantum(ndigits), rounding=ROUND_HALF_UP))
