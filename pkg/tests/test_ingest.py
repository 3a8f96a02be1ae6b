import csv
from datetime import date, timedelta

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ngsvar.errors import (
    DuplicateDate,
    DuplicateSeries,
    EmptyFile,
    MalformedHeader,
    MalformedRow,
    MissingCountry,
    MissingSeries,
    UnfillableGap,
)
from ngsvar.ingest import (
    RAW_VARIABLES,
    DatedSeries,
    align_panel,
    apply_overrides,
    parse_fx,
    parse_jhu,
    parse_market,
    parse_overrides,
)

from conftest import stream

JHU_HEAD = "Province/State,Country/Region,Lat,Long,3/1/20,3/2/20\n"


def test_jhu_sums_provinces():
    text = JHU_HEAD + "A,China,0,0,1,3\nB,China,0,0,2,5\n,Brazil,0,0,9,9\n"
    s = parse_jhu(stream(text), "CN")
    assert s.dates == (date(2020, 3, 1), date(2020, 3, 2))
    assert s.values.tolist() == [3.0, 8.0]


def test_jhu_missing_country():
    with pytest.raises(MissingCountry):
        parse_jhu(stream(JHU_HEAD + ",Brazil,0,0,1,2\n"), "ZA")


def test_jhu_bad_date_header():
    with pytest.raises(MalformedHeader):
        parse_jhu(stream("Province/State,Country/Region,Lat,Long,March 1\n,Brazil,0,0,1\n"), "BR")


def test_jhu_fixture_matches_spreadsheet_read(data_dir):
    s = parse_jhu(data_dir / "jhu_small.csv", "CN")
    frame = pd.read_csv(data_dir / "jhu_small.csv")
    expected = frame[frame["Country/Region"] == "China"].iloc[:, 4:].sum(axis=0)
    assert len(s) == 10
    assert all(a < b for a, b in zip(s.dates, s.dates[1:]))
    assert s.values.tolist() == expected.astype(float).tolist()
    assert [d.strftime("%-m/%-d/%y") for d in s.dates] == list(frame.columns[4:])


def test_jhu_quoted_region_name_not_confused(data_dir):
    # "Korea, South" is quoted and must not shift columns
    s = parse_jhu(data_dir / "jhu_small.csv", "Korea")
    assert s.values[0] == 7513


def test_jhu_decreasing_cumulative_is_a_warning():
    s = parse_jhu(stream(JHU_HEAD + ",India,0,0,10,7\n"), "IN", "cumR")
    assert s.values.tolist() == [10.0, 7.0]
    assert len(s.warnings) == 1 and "2020-03-02" in s.warnings[0]


MARKET_HEAD = "Date,Open,High,Low,Close,Adj Close,Volume\n"


def test_market_drops_null_close():
    rows = [f"2020-03-0{d},1,1,1,{100 + d},{100 + d},5\n" for d in range(2, 7)]
    rows.insert(3, "2020-03-09,null,null,null,null,null,null\n")
    s = parse_market(stream(MARKET_HEAD + "".join(rows)))
    assert len(s) == 5


def test_market_header_only_is_empty():
    with pytest.raises(EmptyFile):
        parse_market(stream(MARKET_HEAD))


def test_market_wrong_column_count():
    with pytest.raises(MalformedRow):
        parse_market(stream(MARKET_HEAD + "2020-03-02,1,1,1,1,1\n"))


def test_market_full_precision(data_dir):
    path = data_dir / "market_small.csv"
    s = parse_market(path)
    with open(path, newline="") as fh:
        raw = [r["Close"] for r in csv.DictReader(fh) if r["Close"] != "null"]
    assert s.values.tolist() == [float(x) for x in raw]
    # 17 significant digits reproduce each parsed double exactly
    assert all(float(format(v, ".17g")) == v for v in s.values)


def test_fx_three_rows(data_dir):
    s = parse_fx(data_dir / "fx_small.csv", "BR")
    assert len(s) == 3
    assert s.values[2] == float("4.8079012345678901")


def test_fx_duplicate_date():
    with pytest.raises(DuplicateDate):
        parse_fx(stream("date,rate\n2020-03-02,1.0\n2020-03-02,1.1\n"))


@pytest.mark.parametrize("value", ['"1,234.5"', "1_234.5", "nan", "inf", "1.2.3"])
def test_fx_strict_numbers(value):
    with pytest.raises(MalformedRow):
        parse_fx(stream(f"date,rate\n2020-03-02,{value}\n"))


def test_fx_unquoted_thousands_separator_is_extra_column():
    with pytest.raises(MalformedRow):
        parse_fx(stream("date,rate\n2020-03-02,1,234.5\n"))


def test_overrides_replace_and_insert():
    series = [DatedSeries("IN", "cumC", [date(2020, 3, 1), date(2020, 3, 3)], [1.0, 5.0])]
    ov = parse_overrides(stream(
        "date,country,variable,value\n2020-03-02,IN,cumC,3\n2020-03-03,IN,cumC,4\n2020-03-02,BR,cumC,9\n"
    ))
    (out,) = apply_overrides(series, ov)
    assert out.values.tolist() == [1.0, 3.0, 4.0]


# ---------------------------------------------------------------------------
# alignment


def _daily(country, variable, start, n, values=None):
    dates = [start + timedelta(days=i) for i in range(n)]
    values = np.arange(1, n + 1, dtype=float) if values is None else values
    return DatedSeries(country, variable, dates, values)


def _full_set(country, start, n, market=None):
    out = [_daily(country, v, start, n) for v in RAW_VARIABLES if v != "SV"]
    out.append(market if market is not None else _daily(country, "SV", start, n))
    return out


def test_forward_fill_weekend():
    fri = date(2020, 3, 13)
    market = DatedSeries("BR", "SV", [fri, fri + timedelta(days=3)], [10.0, 12.0])
    panel = align_panel(_full_set("BR", fri, 4, market), (fri, fri + timedelta(days=3)))
    sv = panel.series("BR", "SV").values.tolist()
    assert sv == [10.0, 10.0, 10.0, 12.0]
    assert panel.filled[0, 1:3, RAW_VARIABLES.index("SV")].all()


def test_study_window_has_203_dates():
    start = date(2020, 3, 1)
    series = [s for c in ("BR", "RU") for s in _full_set(c, start, 220)]
    panel = align_panel(series, (date(2020, 3, 12), date(2020, 9, 30)))
    assert len(panel.dates) == 203
    assert panel.values.shape == (2, 203, 5)


def test_series_starting_after_window_start():
    series = _full_set("BR", date(2020, 3, 1), 10)
    series[-1] = _daily("BR", "SV", date(2020, 3, 5), 6)
    with pytest.raises(UnfillableGap):
        align_panel(series, (date(2020, 3, 3), date(2020, 3, 10)))


def test_covid_gap_is_not_filled():
    series = _full_set("BR", date(2020, 3, 1), 10)
    s = series[0]
    series[0] = DatedSeries("BR", "cumC", s.dates[:4] + s.dates[5:], np.delete(s.values, 4))
    with pytest.raises(UnfillableGap):
        align_panel(series, (date(2020, 3, 1), date(2020, 3, 10)))


def test_missing_and_duplicate_series():
    series = _full_set("BR", date(2020, 3, 1), 5)
    with pytest.raises(MissingSeries):
        align_panel(series[:-1], (date(2020, 3, 1), date(2020, 3, 5)))
    with pytest.raises(DuplicateSeries):
        align_panel(series + series[:1], (date(2020, 3, 1), date(2020, 3, 5)))


@st.composite
def gappy_market(draw):
    start = date(2020, 3, 1)
    n = draw(st.integers(5, 40))
    keep = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    keep[0] = True
    vals = draw(st.lists(st.floats(1, 1e5, allow_nan=False), min_size=n, max_size=n))
    dates = [start + timedelta(days=i) for i in range(n) if keep[i]]
    values = [v for v, k in zip(vals, keep) if k]
    return DatedSeries("BR", "SV", dates, values), n


@settings(max_examples=60, deadline=None)
@given(gappy_market())
def test_forward_fill_properties(case):
    market, n = case
    start = date(2020, 3, 1)
    window = (start, start + timedelta(days=n - 1))
    panel = align_panel(_full_set("BR", start, n, market), window)
    obs = market.as_dict()
    col = panel.series("BR", "SV")
    for d, v in zip(col.dates, col.values):
        # every cell is the latest observation at or before its date
        prior = max(k for k in obs if k <= d)
        assert v == obs[prior]
    again = align_panel(panel.to_series(), window)
    assert np.array_equal(again.values, panel.values)
    assert len(panel.dates) == n
