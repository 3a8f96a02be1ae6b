"""Readers for the raw COVID-19 and market CSV files, and calendar alignment.

Three input formats are supported:

* JHU CSSE wide time series (``Province/State,Country/Region,Lat,Long,<M/D/YY>...``)
* Yahoo-style daily OHLCV (``Date,Open,High,Low,Close,Adj Close,Volume``)
* two-column exchange rates (``date,rate``), quoted as local currency per USD

plus an override file (``date,country,variable,value``) used for manual
corrections of individual observations before alignment.
"""

from __future__ import annotations

import csv
import io
import math
import os
import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from typing import IO, Union

import numpy as np

from .errors import (
    DuplicateDate,
    DuplicateSeries,
    EmptyFile,
    MalformedHeader,
    MalformedRow,
    MissingCountry,
    MissingSeries,
    UnfillableGap,
)

Source = Union[str, os.PathLike, IO[bytes], IO[str]]

BRICS = ("BR", "RU", "IN", "CN", "ZA")
RAW_VARIABLES = ("cumC", "cumD", "cumR", "ER", "SV")
COVID_VARIABLES = frozenset({"cumC", "cumD", "cumR"})

JHU_NAMES = {
    "BR": "Brazil",
    "RU": "Russia",
    "IN": "India",
    "CN": "China",
    "ZA": "South Africa",
}

MARKET_HEADER = ["Date", "Open", "High", "Low", "Close", "Adj Close", "Volume"]
FX_HEADER = ["date", "rate"]
OVERRIDE_HEADER = ["date", "country", "variable", "value"]

# Plain decimal only: rejects thousands separators, "1_000", "nan", "inf".
_NUMBER = re.compile(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?$")


@dataclass(frozen=True)
class DatedSeries:
    """One variable of one country as an ordered run of daily observations."""

    country: str
    variable: str
    dates: tuple[date, ...]
    values: np.ndarray
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dates", tuple(self.dates))
        if values.shape != (len(self.dates),):
            raise ValueError("dates and values differ in length")
        for a, b in zip(self.dates, self.dates[1:]):
            if b == a:
                raise DuplicateDate(f"{self.country}/{self.variable}: duplicate date {a}")
            if b < a:
                raise ValueError(f"{self.country}/{self.variable}: dates not increasing at {b}")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"{self.country}/{self.variable}: non-finite value")

    def __len__(self) -> int:
        return len(self.dates)

    def as_dict(self) -> dict[date, float]:
        return dict(zip(self.dates, self.values.tolist()))


@dataclass(frozen=True)
class PanelDataset:
    """Dense (country, date, variable) array on a daily calendar."""

    countries: tuple[str, ...]
    dates: tuple[date, ...]
    variables: tuple[str, ...]
    values: np.ndarray
    filled: np.ndarray = field(repr=False, default=None)
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        shape = (len(self.countries), len(self.dates), len(self.variables))
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} != {shape}")
        if self.filled is None:
            object.__setattr__(self, "filled", np.zeros(shape, dtype=bool))

    def series(self, country: str, variable: str) -> DatedSeries:
        c = self.countries.index(country)
        v = self.variables.index(variable)
        return DatedSeries(country, variable, self.dates, self.values[c, :, v].copy())

    def to_series(self) -> list[DatedSeries]:
        return [self.series(c, v) for c in self.countries for v in self.variables]


# ---------------------------------------------------------------------------
# low-level helpers


def _open_text(src: Source) -> IO[str]:
    if isinstance(src, (str, os.PathLike)):
        return open(src, "r", encoding="utf-8", newline="")
    if isinstance(src, io.TextIOBase):
        return src
    return io.TextIOWrapper(src, encoding="utf-8", newline="")


def _rows(src: Source) -> Iterable[list[str]]:
    stream = _open_text(src)
    try:
        first = True
        for row in csv.reader(stream):
            if first and row:
                row[0] = row[0].lstrip("\ufeff")
            first = False
            yield row
    finally:
        if isinstance(src, (str, os.PathLike)):
            stream.close()


def parse_number(text: str, where: str) -> float:
    s = text.strip()
    if not _NUMBER.match(s):
        raise MalformedRow(f"{where}: not a plain number: {text!r}")
    return float(s)


def parse_iso_date(text: str, where: str) -> date:
    try:
        return date.fromisoformat(text.strip())
    except ValueError:
        raise MalformedRow(f"{where}: bad date {text!r}") from None


def _jhu_date(text: str) -> date:
    return datetime.strptime(text.strip(), "%m/%d/%y").date()


def _monotone_warnings(country: str, variable: str, dates, values) -> tuple[str, ...]:
    out = []
    for i in range(1, len(values)):
        if values[i] < values[i - 1]:
            out.append(
                f"{country}/{variable}: cumulative count decreases on {dates[i]} "
                f"({values[i - 1]:g} -> {values[i]:g})"
            )
    return tuple(out)


def _finish(country, variable, pairs: list[tuple[date, float]], warnings=()) -> DatedSeries:
    pairs.sort(key=lambda dv: dv[0])
    for (a, _), (b, _) in zip(pairs, pairs[1:]):
        if a == b:
            raise DuplicateDate(f"{country}/{variable}: duplicate date {a}")
    return DatedSeries(
        country, variable, [d for d, _ in pairs], [v for _, v in pairs], tuple(warnings)
    )


# ---------------------------------------------------------------------------
# parsers


def parse_jhu(src: Source, country: str, variable: str = "cumC") -> DatedSeries:
    """Read one country's cumulative counts from a JHU CSSE wide time-series CSV.

    All province rows whose ``Country/Region`` matches are summed. Decreasing
    cumulative counts are kept and reported in ``DatedSeries.warnings``.
    """
    region = JHU_NAMES.get(country, country)
    rows = iter(_rows(src))
    header = next(rows, None)
    if not header:
        raise EmptyFile("JHU file is empty")
    if [h.strip() for h in header[:4]] != ["Province/State", "Country/Region", "Lat", "Long"]:
        raise MalformedHeader(f"unexpected JHU header start: {header[:4]}")
    try:
        dates = [_jhu_date(h) for h in header[4:]]
    except ValueError as exc:
        raise MalformedHeader(f"unparseable JHU date column: {exc}") from None
    if not dates:
        raise MalformedHeader("JHU header has no date columns")

    total = np.zeros(len(dates))
    matched = 0
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise MalformedRow(f"line {lineno}: {len(row)} fields, expected {len(header)}")
        if row[1].strip() != region:
            continue
        matched += 1
        total += [parse_number(x, f"line {lineno}") for x in row[4:]]
    if not matched:
        raise MissingCountry(f"no JHU rows for {region!r}")

    series = _finish(country, variable, list(zip(dates, total.tolist())))
    warns = _monotone_warnings(country, variable, series.dates, series.values)
    return DatedSeries(country, variable, series.dates, series.values, warns)


def parse_market(src: Source, country: str = "", variable: str = "SV") -> DatedSeries:
    """Read the Close column of a Yahoo-style OHLCV CSV.

    Rows whose Close is ``null`` (non-trading days) are dropped; the gaps are
    filled later by :func:`align_panel`.
    """
    rows = iter(_rows(src))
    header = next(rows, None)
    if header is None:
        raise EmptyFile("market file is empty")
    if [h.strip() for h in header] != MARKET_HEADER:
        raise MalformedHeader(f"unexpected market header: {header}")
    close = MARKET_HEADER.index("Close")
    pairs = []
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != len(MARKET_HEADER):
            raise MalformedRow(f"line {lineno}: {len(row)} fields, expected {len(MARKET_HEADER)}")
        if row[close].strip().lower() in ("null", ""):
            continue
        pairs.append(
            (parse_iso_date(row[0], f"line {lineno}"), parse_number(row[close], f"line {lineno}"))
        )
    if not pairs:
        raise EmptyFile("market file has no usable rows")
    return _finish(country, variable, pairs)


def parse_fx(src: Source, country: str = "", variable: str = "ER") -> DatedSeries:
    """Read a ``date,rate`` exchange-rate CSV (local currency per 1 USD).

    Inverting the quote to USD per local unit only flips the sign of the
    day-on-day growth rates (to first order), so either convention can be fed
    through the pipeline as long as it is used consistently.
    """
    rows = iter(_rows(src))
    header = next(rows, None)
    if header is None:
        raise EmptyFile("fx file is empty")
    if [h.strip().lower() for h in header] != FX_HEADER:
        raise MalformedHeader(f"unexpected fx header: {header}")
    pairs = []
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise MalformedRow(f"line {lineno}: {len(row)} fields, expected 2")
        if row[1].strip().lower() in ("null", ""):
            continue
        pairs.append(
            (parse_iso_date(row[0], f"line {lineno}"), parse_number(row[1], f"line {lineno}"))
        )
    if not pairs:
        raise EmptyFile("fx file has no usable rows")
    return _finish(country, variable, pairs)


@dataclass(frozen=True)
class Override:
    date: date
    country: str
    variable: str
    value: float


def parse_overrides(src: Source) -> list[Override]:
    rows = iter(_rows(src))
    header = next(rows, None)
    if header is None:
        raise EmptyFile("override file is empty")
    if [h.strip() for h in header] != OVERRIDE_HEADER:
        raise MalformedHeader(f"unexpected override header: {header}")
    out = []
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise MalformedRow(f"line {lineno}: {len(row)} fields, expected 4")
        where = f"line {lineno}"
        out.append(
            Override(
                parse_iso_date(row[0], where),
                row[1].strip(),
                row[2].strip(),
                parse_number(row[3], where),
            )
        )
    return out


def apply_overrides(series: Sequence[DatedSeries], overrides: Sequence[Override]) -> list[DatedSeries]:
    """Replace (or insert) individual observations; later overrides win."""
    patches: dict[tuple[str, str], dict[date, float]] = {}
    for o in overrides:
        patches.setdefault((o.country, o.variable), {})[o.date] = o.value
    out = []
    for s in series:
        patch = patches.get((s.country, s.variable))
        if not patch:
            out.append(s)
            continue
        merged = s.as_dict()
        merged.update(patch)
        dates = sorted(merged)
        values = [merged[d] for d in dates]
        warns = s.warnings
        if s.variable in COVID_VARIABLES:
            warns = _monotone_warnings(s.country, s.variable, dates, values)
        out.append(DatedSeries(s.country, s.variable, dates, values, warns))
    return out


# ---------------------------------------------------------------------------
# alignment


def calendar(start: date, end: date) -> list[date]:
    if end < start:
        raise ValueError(f"window end {end} precedes start {start}")
    return [start + timedelta(days=i) for i in range((end - start).days + 1)]


def _country_order(codes: Iterable[str]) -> tuple[str, ...]:
    codes = set(codes)
    ordered = [c for c in BRICS if c in codes]
    return tuple(ordered + sorted(codes - set(BRICS)))


def align_panel(
    series: Sequence[DatedSeries],
    window: tuple[date, date],
    fill: str = "forward",
    variables: Sequence[str] = RAW_VARIABLES,
) -> PanelDataset:
    """Put every series on the daily calendar spanning ``window`` (inclusive).

    With ``fill="forward"`` a missing day takes the last observed value at or
    before it (weekends, market holidays). COVID count series must already be
    daily inside the window. ``fill="none"`` treats any missing day as an error.
    """
    if fill not in ("forward", "none"):
        raise ValueError(f"unknown fill policy {fill!r}")
    start, end = window
    days = calendar(start, end)

    by_key: dict[tuple[str, str], DatedSeries] = {}
    for s in series:
        key = (s.country, s.variable)
        if key in by_key:
            raise DuplicateSeries(f"more than one series for {key}")
        by_key[key] = s
    countries = _country_order(c for c, _ in by_key)
    if not countries:
        raise MissingSeries("no series given")
    variables = tuple(variables)

    values = np.empty((len(countries), len(days), len(variables)))
    filled = np.zeros(values.shape, dtype=bool)
    warns: list[str] = []
    for ci, c in enumerate(countries):
        for vi, v in enumerate(variables):
            s = by_key.get((c, v))
            if s is None:
                raise MissingSeries(f"no series for country {c}, variable {v}")
            warns.extend(w for w in s.warnings if _in_window(w, s, start, end))
            col, was_filled = _fill_forward(s, days, allow_fill=fill == "forward" and v not in COVID_VARIABLES)
            values[ci, :, vi] = col
            filled[ci, :, vi] = was_filled
    return PanelDataset(countries, tuple(days), variables, values, filled, tuple(warns))


def _in_window(warning: str, s: DatedSeries, start: date, end: date) -> bool:
    # warnings carry their date as the first ISO token
    m = re.search(r"\d{4}-\d{2}-\d{2}", warning)
    return m is None or start <= date.fromisoformat(m.group()) <= end


def _fill_forward(s: DatedSeries, days: list[date], allow_fill: bool):
    if not s.dates or s.dates[0] > days[0]:
        raise UnfillableGap(
            f"{s.country}/{s.variable}: no observation on or before {days[0]}"
        )
    obs = s.as_dict()
    col = np.empty(len(days))
    was_filled = np.zeros(len(days), dtype=bool)
    # seed with the last observation at or before the first day
    idx = int(np.searchsorted(np.array([d.toordinal() for d in s.dates]), days[0].toordinal(), side="right")) - 1
    last = float(s.values[idx])
    for i, d in enumerate(days):
        if d in obs:
            last = obs[d]
        else:
            if not allow_fill:
                raise UnfillableGap(f"{s.country}/{s.variable}: missing observation on {d}")
            was_filled[i] = True
        col[i] = last
    if not all(math.isfinite(x) for x in col):
        raise UnfillableGap(f"{s.country}/{s.variable}: non-finite value after fill")
    return col, was_filled
