"""Day-on-day growth rates and z-score normalization."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from typing import NamedTuple

import numpy as np

from .errors import LengthTooShort
from .ingest import DatedSeries, PanelDataset

GROWTH_VARIABLES = ("GrowthC", "GrowthD", "GrowthR", "GrowthER", "GrowthSV")
GROWTH_NAMES = dict(zip(("cumC", "cumD", "cumR", "ER", "SV"), GROWTH_VARIABLES))
SCOPES = ("percountry", "pooled")


def growth_name(variable: str) -> str:
    return GROWTH_NAMES.get(variable, f"Growth{variable}")


def growth_values(x) -> tuple[np.ndarray, np.ndarray]:
    """Percentage change ``100 * (x[t] - x[t-1]) / x[t-1]`` for t >= 1.

    Returns the growth array and a mask of zero-base days, whose growth is
    set to 0 rather than dropped so that panels stay aligned.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise LengthTooShort("growth rate needs at least 2 observations")
    prev, cur = x[:-1], x[1:]
    zero_base = prev == 0
    safe = np.where(zero_base, 1.0, prev)
    g = np.where(zero_base, 0.0, 100.0 * (cur - prev) / safe)
    return g, zero_base


def growth_rate(series: DatedSeries) -> DatedSeries:
    g, zero_base = growth_values(series.values)
    flagged = tuple(
        f"{series.country}/{series.variable}: zero base on {d}, growth set to 0"
        for d, z in zip(series.dates[1:], zero_base)
        if z
    )
    return DatedSeries(
        series.country, growth_name(series.variable), series.dates[1:], g, flagged
    )


class ZScore(NamedTuple):
    values: np.ndarray
    degenerate: bool


def zscore(values) -> ZScore:
    """Center by the mean and scale by the sample (n - 1) standard deviation.

    A constant input has no scale; it maps to zeros with ``degenerate=True``.
    """
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise LengthTooShort("zscore needs at least 2 values")
    centered = x - x.mean()
    sd = np.std(x, ddof=1)
    scale = np.max(np.abs(x))
    if sd == 0 or sd <= 1e-14 * scale:
        return ZScore(np.zeros_like(x), True)
    return ZScore(centered / sd, False)


@dataclass(frozen=True)
class GrowthPanel:
    """Normalized growth variables, indexed (country, date, variable)."""

    countries: tuple[str, ...]
    dates: tuple[date, ...]
    values: np.ndarray
    variables: tuple[str, ...] = GROWTH_VARIABLES
    scope: str = "percountry"
    zero_base: np.ndarray = field(default=None, repr=False)
    degenerate: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        shape = (len(self.countries), len(self.dates), len(self.variables))
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} != {shape}")
        if self.zero_base is None:
            object.__setattr__(self, "zero_base", np.zeros(shape, dtype=bool))

    @property
    def K(self) -> int:
        return len(self.variables)

    def tidy_rows(self):
        """Yield ``(country, date, variable, value)`` in country/date/variable order."""
        for ci, c in enumerate(self.countries):
            for ti, d in enumerate(self.dates):
                for vi, v in enumerate(self.variables):
                    yield c, d, v, float(self.values[ci, ti, vi])


def build_growth_panel(panel: PanelDataset, scope: str = "percountry") -> GrowthPanel:
    """Growth-rate every (country, variable) column, then z-score.

    ``scope="percountry"`` standardizes each country's column on its own;
    ``scope="pooled"`` standardizes each variable over all countries stacked.
    """
    if scope not in SCOPES:
        raise ValueError(f"unknown normalization scope {scope!r}")
    C, T, V = panel.values.shape
    raw = np.empty((C, T - 1, V)) if T >= 2 else None
    if raw is None:
        raise LengthTooShort("panel needs at least 2 dates")
    zero_base = np.zeros(raw.shape, dtype=bool)
    for c in range(C):
        for v in range(V):
            raw[c, :, v], zero_base[c, :, v] = growth_values(panel.values[c, :, v])

    out = np.empty_like(raw)
    degenerate = []
    names = tuple(growth_name(v) for v in panel.variables)
    if scope == "percountry":
        for c in range(C):
            for v in range(V):
                z = zscore(raw[c, :, v])
                out[c, :, v] = z.values
                if z.degenerate:
                    degenerate.append((panel.countries[c], names[v]))
    else:
        for v in range(V):
            z = zscore(raw[:, :, v].ravel())
            out[:, :, v] = z.values.reshape(C, T - 1)
            if z.degenerate:
                degenerate.append(("*", names[v]))
    return GrowthPanel(
        panel.countries, panel.dates[1:], out, names, scope, zero_base, tuple(degenerate)
    )
