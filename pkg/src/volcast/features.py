"""Rolling-volatility feature construction, scaling, and chronological splits.

The model inputs are two implied-volatility index levels passed through
untouched plus five realized volatilities; the targets are two more realized
volatilities.  Realized volatility is the trailing sample standard deviation
of log returns, annualized by sqrt(252) and expressed in percent so target
magnitudes sit in the low tens.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from volcast.errors import (
    ConstantColumn,
    EmptyTest,
    EmptyTrain,
    MissingInstrument,
    TooShort,
    WindowTooSmall,
)
from volcast.market_data import AlignedPanel, log_returns

DEFAULT_WINDOW = 20
DEFAULT_PERIODS_PER_YEAR = 252

INPUT_COLUMNS = ("INDIAVIX", "CBOEVIX", "CRUDESDR", "DJIASDR", "DAXSDR", "HANGSDR", "NIKKEISDR")
TARGET_COLUMNS = ("NIFTYSDR", "GOLDSDR")
VIX_COLUMNS = ("INDIAVIX", "CBOEVIX")

# realized-volatility column -> source price series
VOL_SOURCE = {
    "CRUDESDR": "CRUDE",
    "DJIASDR": "DJIA",
    "DAXSDR": "DAX",
    "HANGSDR": "HANGSENG",
    "NIKKEISDR": "NIKKEI",
    "NIFTYSDR": "NIFTY",
    "GOLDSDR": "GOLD",
}

DATASET_HEADER = "date," + ",".join(INPUT_COLUMNS + TARGET_COLUMNS)


@dataclass(frozen=True)
class VolatilitySeries:
    """A dated annualized-volatility track (values >= 0)."""

    name: str
    dates: tuple[dt.date, ...]
    values: np.ndarray


@dataclass(frozen=True)
class FeatureDataset:
    """Aligned model inputs (N x 7) and targets (N x 2) with a date index."""

    dates: tuple[dt.date, ...]
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        if not (len(self.dates) == self.X.shape[0] == self.Y.shape[0]):
            raise ValueError("dates, X and Y must agree on row count")

    def __len__(self) -> int:
        return len(self.dates)

    def select(self, indices) -> "FeatureDataset":
        idx = np.asarray(indices)
        return FeatureDataset(
            dates=tuple(self.dates[i] for i in idx),
            X=self.X[idx],
            Y=self.Y[idx],
        )

    def rows_in_range(self, start: dt.date, end: dt.date) -> np.ndarray:
        return np.array([i for i, d in enumerate(self.dates) if start <= d <= end], dtype=int)

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(DATASET_HEADER + "\n")
            for i, d in enumerate(self.dates):
                row = [d.isoformat()]
                row += [repr(float(v)) for v in self.X[i]]
                row += [repr(float(v)) for v in self.Y[i]]
                fh.write(",".join(row) + "\n")

    @classmethod
    def load_csv(cls, path) -> "FeatureDataset":
        dates: list[dt.date] = []
        rows: list[list[float]] = []
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != DATASET_HEADER:
                raise ValueError(f"unexpected dataset header: {header!r}")
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                parts = line.split(",")
                dates.append(dt.date.fromisoformat(parts[0]))
                rows.append([float(v) for v in parts[1:]])
        data = np.array(rows, dtype=np.float64)
        n_in = len(INPUT_COLUMNS)
        return cls(dates=tuple(dates), X=data[:, :n_in], Y=data[:, n_in:])


def rolling_volatility(returns, window: int = DEFAULT_WINDOW,
                       periods_per_year: int = DEFAULT_PERIODS_PER_YEAR) -> np.ndarray:
    """Trailing sample standard deviation of returns, annualized.

    Element k covers returns[k : k + window] with the (window - 1) divisor;
    output length is len(returns) - window + 1.
    """
    r = np.asarray(returns, dtype=np.float64)
    if window < 2:
        raise WindowTooSmall(f"window must be >= 2, got {window}")
    if r.size < window:
        raise TooShort(f"need at least {window} returns, got {r.size}")
    windows = sliding_window_view(r, window)
    # shifting by a window constant leaves the std unchanged but makes
    # constant windows come out exactly zero
    shifted = windows - windows[:, :1]
    return shifted.std(axis=1, ddof=1) * math.sqrt(periods_per_year)


def build_dataset(panel: AlignedPanel, window: int = DEFAULT_WINDOW) -> FeatureDataset:
    """Assemble the 7-input / 2-target dataset from a nine-instrument panel.

    Realized-volatility columns lose one row to differencing and window - 1
    rows to the trailing window, so the dataset starts ``window`` rows after
    the panel does.  VIX levels pass through on the retained dates.
    """
    needed = set(VOL_SOURCE.values()) | set(VIX_COLUMNS)
    missing = sorted(needed - set(panel.columns))
    if missing:
        raise MissingInstrument(missing)

    dates = panel.dates[window:]
    vols: dict[str, np.ndarray] = {}
    for col, src in VOL_SOURCE.items():
        rets = log_returns(panel.columns[src])
        vols[col] = rolling_volatility(rets, window) * 100.0

    x_cols = []
    for col in INPUT_COLUMNS:
        if col in VIX_COLUMNS:
            x_cols.append(panel.columns[col][window:])
        else:
            x_cols.append(vols[col])
    y_cols = [vols[col] for col in TARGET_COLUMNS]
    return FeatureDataset(dates=tuple(dates),
                          X=np.column_stack(x_cols),
                          Y=np.column_stack(y_cols))


def volatility_series(panel: AlignedPanel, symbol: str,
                      window: int = DEFAULT_WINDOW) -> VolatilitySeries:
    """Realized-volatility track (percent) for one panel instrument."""
    rets = log_returns(panel.columns[symbol])
    values = rolling_volatility(rets, window) * 100.0
    return VolatilitySeries(name=f"{symbol}SDR" if symbol != "HANGSENG" else "HANGSDR",
                            dates=panel.dates[window:], values=values)


@dataclass(frozen=True)
class Scaler:
    """Per-column affine map onto [-1, +1], fitted on training rows only.

    Out-of-range values extrapolate linearly; nothing is clipped.  The
    inverse transform recovers inputs to floating-point roundoff.
    """

    minimum: np.ndarray
    maximum: np.ndarray

    def transform(self, M) -> np.ndarray:
        M = np.asarray(M, dtype=np.float64)
        return -1.0 + 2.0 * (M - self.minimum) / (self.maximum - self.minimum)

    def inverse_transform(self, M) -> np.ndarray:
        M = np.asarray(M, dtype=np.float64)
        return self.minimum + (M + 1.0) * (self.maximum - self.minimum) / 2.0


def fit_scaler(X, Y, x_names=INPUT_COLUMNS, y_names=TARGET_COLUMNS) -> tuple[Scaler, Scaler]:
    """Fit input and target scalers on the rows passed in (training rows)."""
    return _fit_one(X, x_names), _fit_one(Y, y_names)


def _fit_one(M, names) -> Scaler:
    M = np.asarray(M, dtype=np.float64)
    if M.shape[0] < 2:
        raise TooShort("need at least 2 rows to fit a scaler")
    lo = M.min(axis=0)
    hi = M.max(axis=0)
    flat = hi <= lo
    if np.any(flat):
        which = [names[i] if i < len(names) else str(i) for i in np.nonzero(flat)[0]]
        raise ConstantColumn(", ".join(which))
    return Scaler(minimum=lo, maximum=hi)


def chronological_split(ds: FeatureDataset,
                        train_range: tuple[dt.date, dt.date],
                        test_range: tuple[dt.date, dt.date],
                        validation_fraction: float = 0.15,
                        ) -> tuple[FeatureDataset, FeatureDataset, FeatureDataset]:
    """Split by date ranges; the tail of the train range becomes validation.

    The test range may precede the train range (backcasting) or overlap it;
    ranges are interpreted on the feature dataset's own dates.
    """
    if not 0.0 <= validation_fraction <= 0.5:
        raise ValueError(f"validation_fraction must be in [0, 0.5], got {validation_fraction}")
    train_idx = ds.rows_in_range(*train_range)
    test_idx = ds.rows_in_range(*test_range)
    if train_idx.size == 0:
        raise EmptyTrain(f"no rows in train range {train_range[0]}..{train_range[1]}")
    if test_idx.size == 0:
        raise EmptyTest(f"no rows in test range {test_range[0]}..{test_range[1]}")
    n_val = math.ceil(validation_fraction * train_idx.size)
    if n_val > 0:
        fit_idx, val_idx = train_idx[:-n_val], train_idx[-n_val:]
    else:
        fit_idx, val_idx = train_idx, train_idx[:0]
    if fit_idx.size == 0:
        raise EmptyTrain("validation fraction consumed the whole train range")
    return ds.select(fit_idx), ds.select(val_idx), ds.select(test_idx)
