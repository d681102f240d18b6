"""Order statistics with the quartile convention used for run stability."""

from __future__ import annotations

import statistics
from decimal import ROUND_HALF_UP, Decimal

from .errors import UndefinedMetricError


def median(values) -> float:
    """Median; an even count averages the two middle values."""
    values = list(values)
    if not values:
        raise UndefinedMetricError("median of empty sequence")
    return statistics.median(values)


def quartiles(values) -> tuple[float, float]:
    """(Q1, Q3) as medians of the lower and upper halves.

    With an odd count the overall median belongs to neither half
    (Moore and McCabe's "method 1"). Tukey hinges differ for n = 4k + 1,
    e.g. [94, 473, 473, 540, 543] gives Q1 = 283.5 here, 473 with hinges.
    """
    data = sorted(values)
    n = len(data)
    if n < 2:
        raise UndefinedMetricError(f"quartiles need at least 2 values, got {n}")
    half = n // 2
    lower, upper = data[:half], data[n - half :]
    return statistics.median(lower), statistics.median(upper)


def iqr(values) -> float:
    q1, q3 = quartiles(values)
    return float(q3 - q1)


def round_half_up(x) -> int:
    return int(Decimal(str(x)).quantize(Decimal(1), rounding=ROUND_HALF_UP))
