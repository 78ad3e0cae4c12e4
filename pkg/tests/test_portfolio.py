from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from calmtier.bundle import apqc_records
from calmtier.classifier import Tier
from calmtier.portfolio import (
    DomainError,
    EmptyPortfolio,
    PortfolioRecord,
    coordination_tax,
    dump_portfolio,
    estimate_f,
    load_portfolio,
    percent,
    summarize,
    tax_from_costs,
    tax_report,
    wilson_interval,
)

fs = st.fractions(min_value=0, max_value=1, max_denominator=1000)
cs = st.fractions(min_value=1, max_value=100, max_denominator=1000).filter(lambda c: c > 1)


@pytest.mark.parametrize("f, c, expected", [
    ("0.26", "4.4", 0.571818), ("0.26", "2.3", 0.418261),
    ("0.58", "2.3", 0.237391), ("0.58", "4.4", 0.324545),
    ("1", "3", 0.0), ("0", "2", 0.5),
])
def test_tax_values(f, c, expected):
    assert float(coordination_tax(Fraction(f), Fraction(c))) == pytest.approx(expected, abs=1e-6)


def test_tax_domain():
    with pytest.raises(DomainError):
        coordination_tax(Fraction(3, 2), 2)
    with pytest.raises(DomainError):
        coordination_tax(Fraction(1, 2), 1)


def test_costs_example():
    uniform, selective, t = tax_from_costs(100, Fraction("0.26"), Fraction("4.4"))
    assert (uniform, selective) == (440, Fraction("188.4"))
    assert t == coordination_tax(Fraction("0.26"), Fraction("4.4"))
    assert tax_from_costs(1, 0, 2) == (2, 1, Fraction(1, 2))
    assert tax_from_costs(7, 1, Fraction(3))[2] == 0


@given(fs, fs, cs)
def test_tax_decreases_in_f(f1, f2, c):
    lo, hi = sorted((f1, f2))
    assert coordination_tax(lo, c) >= coordination_tax(hi, c)


@given(fs, cs, cs)
def test_tax_increases_in_c_and_stays_bounded(f, c1, c2):
    lo, hi = sorted((c1, c2))
    assert coordination_tax(f, lo) <= coordination_tax(f, hi)
    assert 0 <= coordination_tax(f, hi) < 1


def test_wilson_examples():
    assert wilson_interval(0, 1)[0] == 0
    assert wilson_interval(0, 1)[1] == pytest.approx(0.7935, abs=1e-4)
    assert wilson_interval(0, 10)[0] == 0 and wilson_interval(10, 10)[1] == 1
    lo, hi = wilson_interval(5564, 13417)
    assert (round(lo, 3), round(hi, 3)) == (0.406, 0.423)


@given(st.integers(1, 5000).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))),
       st.sampled_from([0.8, 0.9, 0.95, 0.99]))
def test_wilson_contains_estimate(kn, conf):
    k, n = kn
    lo, hi = wilson_interval(k, n, conf)
    assert 0 <= lo <= k / n <= hi <= 1


def test_wilson_rejects_bad_input():
    with pytest.raises(DomainError):
        wilson_interval(3, 2)
    with pytest.raises(DomainError):
        wilson_interval(0, 0)


def test_apqc_summary():
    rows, total = summarize(apqc_records())
    assert (total.m, total.m_o, total.nm) == (39, 9, 17)
    assert percent(total.monotonic, 1) == "73.8%"
    by_name = {r.category: r for r in rows}
    assert (by_name["Financial Resources"].m, by_name["Financial Resources"].m_o,
            by_name["Financial Resources"].nm) == (2, 2, 3)
    assert percent(by_name["Financial Resources"].monotonic) == "57%"
    assert by_name["Risk & Compliance"].monotonic == 1
    assert [r.monotonic for r in rows] == sorted((r.monotonic for r in rows), reverse=True)


def test_estimate_f():
    f, (lo, hi) = estimate_f(apqc_records())
    assert f == Fraction(17, 65) and lo < f < hi
    nm = [PortfolioRecord(f"t{i}", "x", Tier.NM) for i in range(4)]
    assert estimate_f(nm)[0] == 1
    f, (lo, hi) = estimate_f([PortfolioRecord("t", "x", Tier.M)])
    assert f == 0 and lo == 0 and hi == pytest.approx(0.7935, abs=1e-4)
    with pytest.raises(EmptyPortfolio):
        estimate_f([])


def test_single_record_summary():
    rows, total = summarize([PortfolioRecord("t", "Solo", Tier.NM)])
    assert len(rows) == 1 and rows[0].monotonic == 0 and total.total == 1


def test_csv_round_trip():
    records = apqc_records()
    assert load_portfolio(dump_portfolio(records)) == records
    with pytest.raises(ValueError):
        load_portfolio("id,cat,tier\n")
    with pytest.raises(ValueError):
        load_portfolio("task_id,category,tier\nx,y,Z\n")


def test_tax_report_range():
    rep = tax_report(Fraction("0.26"), (Fraction("2.3"), Fraction("4.4")))
    assert [percent(t) for t in rep.T_range] == ["42%", "57%"]
    assert rep.c == Fraction("3.35")
    with pytest.raises(DomainError):
        tax_report(Fraction("0.26"), (Fraction(4), Fraction(2)))


def test_percent_rounds_half_even():
    assert percent(Fraction(1, 8), 1) == "12.5%"
    assert percent(Fraction(1, 200)) == "0%"
    assert percent(Fraction(3, 200)) == "2%"


def test_higher_overhead_range():
    f = Fraction("0.26")
    assert [percent(coordination_tax(f, c)) for c in (4, 10)] == ["56%", "67%"]
