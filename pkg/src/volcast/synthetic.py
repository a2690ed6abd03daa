"""Deterministic synthetic market fixture.

The real market extracts behind the pipeline are not redistributable, so the
repo carries a generator instead: nine instruments driven by one slowly
varying annualized-volatility factor, with a crisis regime (v roughly 2.5x)
pinned to calendar year 2008.  Implied-volatility indexes track the factor
with mild noise; price series share a common daily shock so their realized
volatilities co-move the way real markets' do.  Everything derives from one
seed; identical seeds give identical CSV bytes.
"""

from __future__ import annotations

import datetime as dt
import math

import numpy as np

from volcast.market_data import PriceBar, PriceSeries, write_price_csv

DEFAULT_SEED = 413
DEFAULT_START = dt.date(2007, 11, 1)
DEFAULT_END = dt.date(2015, 4, 30)

PRICE_SYMBOLS = ("NIFTY", "GOLD", "CRUDE", "DJIA", "DAX", "HANGSENG", "NIKKEI")

_BETA = {"NIFTY": 1.0, "GOLD": 0.75, "CRUDE": 1.35, "DJIA": 0.9,
         "DAX": 1.1, "HANGSENG": 1.2, "NIKKEI": 1.05}
_P0 = {"NIFTY": 6000.0, "GOLD": 1400.0, "CRUDE": 95.0, "DJIA": 14000.0,
       "DAX": 8000.0, "HANGSENG": 22000.0, "NIKKEI": 14000.0}

_BASE_VOL = 0.16          # annualized fraction in the calm regime
_CRISIS_FACTOR = 2.6      # multiplies the factor throughout 2008
_COMMON_SHARE = 0.85      # variance share of the common daily shock
_SMOOTH_WINDOW = 20       # trailing window the implied indexes average over


def business_days(start: dt.date, end: dt.date) -> list[dt.date]:
    days = []
    d = start
    one = dt.timedelta(days=1)
    while d <= end:
        if d.weekday() < 5:
            days.append(d)
        d += one
    return days


def _ar1(innovations: np.ndarray, phi: float) -> np.ndarray:
    out = np.empty_like(innovations)
    prev = 0.0
    for i, e in enumerate(innovations):
        prev = phi * prev + e
        out[i] = prev
    return out


def _trailing_rms(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing root-mean-square with partial windows at the start."""
    sq = values * values
    csum = np.concatenate([[0.0], np.cumsum(sq)])
    out = np.empty_like(values)
    for i in range(len(values)):
        lo = max(0, i - window + 1)
        out[i] = math.sqrt((csum[i + 1] - csum[lo]) / (i + 1 - lo))
    return out


def latent_volatility(dates, rng) -> np.ndarray:
    """Annualized volatility factor: smooth cycles + AR wander + 2008 regime."""
    n = len(dates)
    t = np.arange(n, dtype=np.float64)
    wander = _ar1(rng.normal(0.0, 0.07, size=n), phi=0.95)
    log_vol = (math.log(_BASE_VOL)
               + 0.25 * np.sin(2.0 * np.pi * t / 420.0)
               + 0.32 * np.sin(2.0 * np.pi * t / 90.0 + 1.0)
               + wander)
    crisis = np.array([d.year == 2008 for d in dates])
    log_vol[crisis] += math.log(_CRISIS_FACTOR)
    return np.exp(np.clip(log_vol, math.log(0.04), math.log(1.5)))


def generate_price_series(seed: int = DEFAULT_SEED,
                          start: dt.date = DEFAULT_START,
                          end: dt.date = DEFAULT_END) -> dict[str, PriceSeries]:
    """All nine instrument series, keyed by symbol.

    Each instrument skips a deterministic handful of dates (its own
    holidays), so downstream calendar alignment has real work to do.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    dates = business_days(start, end)
    n = len(dates)
    sigma = latent_volatility(dates, rng)

    common = rng.normal(size=n)
    idio = {sym: rng.normal(size=n) for sym in PRICE_SYMBOLS}
    vix_noise = {"INDIAVIX": _ar1(rng.normal(0.0, 0.25, size=n), phi=0.97),
                 "CBOEVIX": _ar1(rng.normal(0.0, 0.25, size=n), phi=0.97)}

    daily = sigma / math.sqrt(252.0)
    w_common = math.sqrt(_COMMON_SHARE)
    w_idio = math.sqrt(1.0 - _COMMON_SHARE)

    levels: dict[str, np.ndarray] = {}
    for sym in PRICE_SYMBOLS:
        shocks = w_common * common + w_idio * idio[sym]
        returns = _BETA[sym] * daily * shocks
        levels[sym] = _P0[sym] * np.exp(np.cumsum(returns))
    # implied indexes: near-term expectation of realized vol, i.e. the factor's
    # trailing level (same horizon as the realized-vol targets) plus mild noise
    expected = _trailing_rms(sigma, _SMOOTH_WINDOW)
    levels["INDIAVIX"] = 100.0 * expected * (1.0 + 0.04 * vix_noise["INDIAVIX"]) + 1.0
    levels["CBOEVIX"] = 90.0 * expected * (1.0 + 0.04 * vix_noise["CBOEVIX"]) + 1.0

    out: dict[str, PriceSeries] = {}
    for sym, values in levels.items():
        n_holidays = int(rng.integers(8, 19))
        holidays = set(rng.choice(n, size=n_holidays, replace=False).tolist())
        bars = tuple(PriceBar(d, float(v)) for i, (d, v) in enumerate(zip(dates, values))
                     if i not in holidays)
        out[sym] = PriceSeries(symbol=sym, bars=bars)
    return out


def write_fixture(out_dir, seed: int = DEFAULT_SEED,
                  start: dt.date = DEFAULT_START,
                  end: dt.date = DEFAULT_END) -> list[str]:
    """Write one CSV per instrument into out_dir; returns the paths."""
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for sym, series in generate_price_series(seed, start, end).items():
        path = out_dir / f"{sym}.csv"
        write_price_csv(series, path)
        paths.append(str(path))
    return paths
