"""Portfolio statistics and the coordination tax.

The tax is the share of total spend that goes to coordinating tasks which
never needed it, when every task in a portfolio is coordinated uniformly::

    T(f, c) = (1 - f) * (c - 1) / c

with ``f`` the non-monotone fraction of the portfolio and ``c`` the cost
multiplier of a coordinated task relative to an uncoordinated one. Only NM
tasks count towards ``f``; M-O tasks need ordering but no coordination.
"""
from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction
from math import sqrt
from statistics import NormalDist
from typing import Iterable, Sequence

from calmtier.classifier import Tier

Number = Fraction | float | int


class DomainError(ValueError):
    pass


class EmptyPortfolio(ValueError):
    pass


@dataclass(frozen=True)
class PortfolioRecord:
    task_id: str
    category: str
    tier: Tier


def _check_fc(f: Number, c: Number) -> None:
    if not 0 <= f <= 1:
        raise DomainError(f"f must lie in [0, 1], got {f}")
    if not c > 1:
        raise DomainError(f"c must exceed 1, got {c}")


def coordination_tax(f: Number, c: Number) -> Number:
    """Exact for ``Fraction``/``int`` inputs, float arithmetic otherwise."""
    _check_fc(f, c)
    return (1 - f) * (c - 1) / c


def tax_from_costs(n: int, f: Number, c: Number) -> tuple[Number, Number, Number]:
    """(uniform cost, selective cost, normalized saving) for ``n`` tasks."""
    _check_fc(f, c)
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n}")
    uniform = n * c
    selective = n * (1 - f + f * c)
    return uniform, selective, (uniform - selective) / uniform


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion ``k / n``."""
    if n < 1 or not 0 <= k <= n:
        raise DomainError(f"need 0 <= k <= n and n >= 1, got k={k}, n={n}")
    if not 0 < confidence < 1:
        raise DomainError(f"confidence must lie in (0, 1), got {confidence}")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z / denom * sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return lo, hi


def estimate_f(records: Sequence[PortfolioRecord],
               confidence: float = 0.95) -> tuple[Fraction, tuple[float, float]]:
    if not records:
        raise EmptyPortfolio("portfolio has no records")
    nm = sum(1 for r in records if r.tier is Tier.NM)
    return Fraction(nm, len(records)), wilson_interval(nm, len(records), confidence)


@dataclass(frozen=True)
class CategoryRow:
    category: str
    m: int
    m_o: int
    nm: int

    @property
    def total(self) -> int:
        return self.m + self.m_o + self.nm

    @property
    def monotonic(self) -> Fraction:
        return Fraction(self.m + self.m_o, self.total)


def summarize(records: Sequence[PortfolioRecord]) -> tuple[list[CategoryRow], CategoryRow]:
    """Per-category tier counts, most monotonic first, plus the overall row.

    Ties keep the order in which categories first appear in ``records``.
    """
    if not records:
        raise EmptyPortfolio("portfolio has no records")
    counts: dict[str, Counter] = {}
    for r in records:
        counts.setdefault(r.category, Counter())[r.tier] += 1
    rows = [CategoryRow(cat, c[Tier.M], c[Tier.M_O], c[Tier.NM]) for cat, c in counts.items()]
    rows.sort(key=lambda row: -row.monotonic)
    total = CategoryRow("Total", sum(r.m for r in rows), sum(r.m_o for r in rows),
                        sum(r.nm for r in rows))
    return rows, total


def percent(x: Number, places: int = 0) -> str:
    """Percentage string, rounded half-to-even at the shown precision."""
    exact = Fraction(x) * 100 if not isinstance(x, float) else Fraction(str(x)) * 100
    q = Decimal(exact.numerator) / Decimal(exact.denominator)
    step = Decimal(1).scaleb(-places)
    return f"{q.quantize(step, rounding=ROUND_HALF_EVEN)}%"


@dataclass(frozen=True)
class TaxReport:
    n: int | None
    f: Fraction
    f_ci: tuple[float, float] | None
    c: Fraction
    T: Fraction
    c_range: tuple[Fraction, Fraction] | None = None
    T_range: tuple[Fraction, Fraction] | None = None

    def __post_init__(self) -> None:
        _check_fc(self.f, self.c)

    def to_json(self) -> dict:
        def num(x):
            return None if x is None else float(x)

        return {
            "n": self.n,
            "f": float(self.f),
            "f_ci": None if self.f_ci is None else list(self.f_ci),
            "c": float(self.c),
            "T": float(self.T),
            "T_exact": str(self.T),
            "T_percent": percent(self.T),
            "c_range": None if self.c_range is None else [num(x) for x in self.c_range],
            "T_range": None if self.T_range is None else [num(x) for x in self.T_range],
        }


def tax_report(f: Fraction, c: Fraction | tuple[Fraction, Fraction], *,
               n: int | None = None, f_ci: tuple[float, float] | None = None) -> TaxReport:
    """Tax at a point ``c`` or over a ``(lo, hi)`` range.

    For a range the point estimate is taken at the midpoint and ``T_range``
    holds the tax at the two ends.
    """
    if isinstance(c, tuple):
        lo, hi = c
        if lo > hi:
            raise DomainError("c range must have lo <= hi")
        mid = (lo + hi) / 2
        return TaxReport(n, f, f_ci, mid, coordination_tax(f, mid), (lo, hi),
                         (coordination_tax(f, lo), coordination_tax(f, hi)))
    return TaxReport(n, f, f_ci, c, coordination_tax(f, c))


def report_from_records(records: Sequence[PortfolioRecord],
                        c: Fraction | tuple[Fraction, Fraction]) -> TaxReport:
    f, ci = estimate_f(records)
    return tax_report(f, c, n=len(records), f_ci=ci)


# --- CSV -----------------------------------------------------------------

HEADER = ["task_id", "category", "tier"]


def load_portfolio(text: str) -> list[PortfolioRecord]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != HEADER:
        raise ValueError(f"portfolio header must be {','.join(HEADER)}")
    records = []
    for lineno, row in enumerate(reader, start=2):
        try:
            tier = Tier.parse(row["tier"])
        except ValueError:
            raise ValueError(f"line {lineno}: unknown tier {row['tier']!r}") from None
        records.append(PortfolioRecord(row["task_id"], row["category"], tier))
    return records


def dump_portfolio(records: Iterable[PortfolioRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for r in records:
        writer.writerow([r.task_id, r.category, r.tier.value])
    return buf.getvalue()
