"""Per-instrument price CSV ingestion and multi-market calendar alignment.

Input files carry one instrument each: UTF-8, header ``date,close``, dates as
``YYYY-MM-DD``, closes as positive decimal literals.  Lines starting with
``#`` are comments.  Differing exchange holidays are reconciled by a strict
inner join on dates; the cost of that join is reported per instrument.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from volcast.errors import (
    DuplicateDate,
    EmptyFile,
    EmptyIntersection,
    EmptyWindow,
    MalformedRow,
    NonPositivePrice,
    TooShort,
)

SYMBOLS = (
    "NIFTY",
    "GOLD",
    "CRUDE",
    "DJIA",
    "DAX",
    "HANGSENG",
    "NIKKEI",
    "INDIAVIX",
    "CBOEVIX",
)

_HEADER = "date,close"


@dataclass(frozen=True)
class PriceBar:
    """One trading day's closing level."""

    date: dt.date
    close: float


@dataclass(frozen=True)
class PriceSeries:
    """Sorted, duplicate-free daily closes for one instrument."""

    symbol: str
    bars: tuple[PriceBar, ...]

    def dates(self) -> tuple[dt.date, ...]:
        return tuple(b.date for b in self.bars)

    def closes(self) -> np.ndarray:
        return np.array([b.close for b in self.bars], dtype=np.float64)

    def __len__(self) -> int:
        return len(self.bars)


@dataclass(frozen=True)
class AlignedPanel:
    """Several instruments on their common trading calendar.

    ``dropped_rows`` counts, per instrument, the observations discarded by
    the intersection join.
    """

    dates: tuple[dt.date, ...]
    columns: dict[str, np.ndarray]
    dropped_rows: dict[str, int]

    def __len__(self) -> int:
        return len(self.dates)


def parse_price_csv(path, symbol: str) -> PriceSeries:
    """Parse one instrument CSV into a sorted PriceSeries.

    Rows may appear out of date order; the result is sorted ascending.
    Raises MalformedRow (with the line number), DuplicateDate, or EmptyFile.
    """
    bars: list[PriceBar] = []
    seen: set[dt.date] = set()
    header_seen = False
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                if line != _HEADER:
                    raise MalformedRow(path, line_no, f"expected header '{_HEADER}', got '{line}'")
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise MalformedRow(path, line_no, f"expected 2 fields, got {len(parts)}")
            try:
                date = dt.date.fromisoformat(parts[0].strip())
            except ValueError:
                raise MalformedRow(path, line_no, f"unparseable date '{parts[0].strip()}'") from None
            try:
                close = float(parts[1])
            except ValueError:
                raise MalformedRow(path, line_no, f"non-numeric close '{parts[1].strip()}'") from None
            if not np.isfinite(close) or close <= 0.0:
                raise MalformedRow(path, line_no, f"non-positive close {parts[1].strip()}")
            if date in seen:
                raise DuplicateDate(f"{path}: duplicate date {date.isoformat()}")
            seen.add(date)
            bars.append(PriceBar(date, close))
    if not bars:
        raise EmptyFile(str(path))
    bars.sort(key=lambda b: b.date)
    return PriceSeries(symbol=symbol, bars=tuple(bars))


def write_price_csv(series: PriceSeries, path) -> None:
    """Write a PriceSeries in the same format parse_price_csv reads.

    Closes use Python's shortest round-trip float representation, so a
    parse -> write -> parse cycle is lossless.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_HEADER + "\n")
        for bar in series.bars:
            fh.write(f"{bar.date.isoformat()},{bar.close!r}\n")


def align(series: list[PriceSeries]) -> AlignedPanel:
    """Inner-join several series onto their common dates.

    Raises EmptyIntersection when no date is shared by all series.
    """
    if len(series) < 2:
        raise ValueError("align requires at least two series")
    common = set(series[0].dates())
    for s in series[1:]:
        common &= set(s.dates())
    if not common:
        raise EmptyIntersection(
            "no common dates across " + ", ".join(s.symbol for s in series)
        )
    dates = tuple(sorted(common))
    columns: dict[str, np.ndarray] = {}
    dropped: dict[str, int] = {}
    for s in series:
        by_date = {b.date: b.close for b in s.bars}
        columns[s.symbol] = np.array([by_date[d] for d in dates], dtype=np.float64)
        dropped[s.symbol] = len(s.bars) - len(dates)
    return AlignedPanel(dates=dates, columns=columns, dropped_rows=dropped)


def panel_as_series(panel: AlignedPanel) -> list[PriceSeries]:
    """Reinterpret panel columns as PriceSeries (used for re-alignment)."""
    out = []
    for symbol, values in panel.columns.items():
        bars = tuple(PriceBar(d, float(v)) for d, v in zip(panel.dates, values))
        out.append(PriceSeries(symbol=symbol, bars=bars))
    return out


def write_alignment_report(panel: AlignedPanel, path) -> None:
    """Emit the join cost as CSV: symbol,rows_in,rows_kept,rows_dropped."""
    kept = len(panel.dates)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("symbol,rows_in,rows_kept,rows_dropped\n")
        for symbol in panel.columns:
            dropped = panel.dropped_rows[symbol]
            fh.write(f"{symbol},{kept + dropped},{kept},{dropped}\n")


def log_returns(prices) -> np.ndarray:
    """Natural-log returns: element i is ln(p[i+1] / p[i])."""
    p = np.asarray(prices, dtype=np.float64)
    if p.size < 2:
        raise TooShort(f"need at least 2 prices, got {p.size}")
    if np.any(p <= 0.0):
        raise NonPositivePrice("prices must be strictly positive")
    return np.log(p[1:] / p[:-1])


def slice_window(panel: AlignedPanel, start: dt.date, end: dt.date) -> AlignedPanel:
    """Keep rows with start <= date <= end (inclusive both ends)."""
    if start > end:
        raise ValueError(f"start {start} after end {end}")
    idx = [i for i, d in enumerate(panel.dates) if start <= d <= end]
    if not idx:
        raise EmptyWindow(f"no rows in [{start}, {end}]")
    dates = tuple(panel.dates[i] for i in idx)
    columns = {sym: vals[idx] for sym, vals in panel.columns.items()}
    return AlignedPanel(dates=dates, columns=columns, dropped_rows=dict(panel.dropped_rows))
