import datetime as dt
import math

import numpy as np
import pytest

from volcast import market_data as md
from volcast.errors import (
    DuplicateDate,
    EmptyFile,
    EmptyIntersection,
    EmptyWindow,
    MalformedRow,
    NonPositivePrice,
    TooShort,
)


def _write(tmp_path, text, name="prices.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def _series(symbol, pairs):
    bars = tuple(md.PriceBar(dt.date.fromisoformat(d), c) for d, c in pairs)
    return md.PriceSeries(symbol=symbol, bars=bars)


class TestParsePriceCsv:
    def test_minimal_well_formed(self, tmp_path):
        path = _write(tmp_path, "date,close\n2013-01-01,100.0\n2013-01-02,101.5\n")
        series = md.parse_price_csv(path, "NIFTY")
        assert series.symbol == "NIFTY"
        assert len(series) == 2
        assert series.bars[0] == md.PriceBar(dt.date(2013, 1, 1), 100.0)
        assert series.bars[1].close == 101.5

    def test_out_of_order_rows_sorted(self, tmp_path):
        path = _write(tmp_path, "date,close\n2013-01-03,102.0\n2013-01-01,100.0\n2013-01-02,101.0\n")
        series = md.parse_price_csv(path, "GOLD")
        assert [b.date.day for b in series.bars] == [1, 2, 3]

    def test_negative_close_names_line(self, tmp_path):
        path = _write(tmp_path, "date,close\n2013-01-01,100.0\n2013-01-02,-5.0\n")
        with pytest.raises(MalformedRow) as exc:
            md.parse_price_csv(path, "NIFTY")
        assert exc.value.line_no == 3

    def test_zero_close_rejected(self, tmp_path):
        path = _write(tmp_path, "date,close\n2013-01-01,0\n")
        with pytest.raises(MalformedRow):
            md.parse_price_csv(path, "NIFTY")

    def test_non_numeric_close(self, tmp_path):
        path = _write(tmp_path, "date,close\n2013-01-01,abc\n")
        with pytest.raises(MalformedRow) as exc:
            md.parse_price_csv(path, "NIFTY")
        assert "abc" in str(exc.value)

    def test_unparseable_date(self, tmp_path):
        path = _write(tmp_path, "date,close\n01/02/2013,100.0\n")
        with pytest.raises(MalformedRow):
            md.parse_price_csv(path, "NIFTY")

    def test_duplicate_date(self, tmp_path):
        path = _write(tmp_path, "date,close\n2013-01-01,100.0\n2013-01-01,101.0\n")
        with pytest.raises(DuplicateDate):
            md.parse_price_csv(path, "NIFTY")

    def test_empty_file(self, tmp_path):
        with pytest.raises(EmptyFile):
            md.parse_price_csv(_write(tmp_path, "date,close\n"), "NIFTY")

    def test_comments_and_blank_lines_ignored(self, tmp_path):
        path = _write(tmp_path, "# source: test\ndate,close\n\n2013-01-01,100.0\n# trailing\n")
        assert len(md.parse_price_csv(path, "NIFTY")) == 1

    def test_wrong_header(self, tmp_path):
        path = _write(tmp_path, "day,price\n2013-01-01,100.0\n")
        with pytest.raises(MalformedRow) as exc:
            md.parse_price_csv(path, "NIFTY")
        assert exc.value.line_no == 1

    def test_roundtrip_is_lossless(self, tmp_path):
        rng = np.random.default_rng(11)
        pairs = [((dt.date(2013, 1, 1) + dt.timedelta(days=i)).isoformat(),
                  float(rng.uniform(1, 5000))) for i in range(40)]
        original = _series("DAX", pairs)
        path = tmp_path / "out.csv"
        md.write_price_csv(original, path)
        again = md.parse_price_csv(path, "DAX")
        assert again == original  # bit-exact dates and closes


class TestAlign:
    def test_intersection_and_drop_counts(self):
        a = _series("A", [("2013-01-01", 1.0), ("2013-01-02", 2.0), ("2013-01-03", 3.0)])
        b = _series("B", [("2013-01-02", 5.0), ("2013-01-03", 6.0), ("2013-01-04", 7.0)])
        panel = md.align([a, b])
        assert panel.dates == (dt.date(2013, 1, 2), dt.date(2013, 1, 3))
        assert panel.dropped_rows == {"A": 1, "B": 1}
        assert panel.columns["A"].tolist() == [2.0, 3.0]
        assert panel.columns["B"].tolist() == [5.0, 6.0]

    def test_identical_calendars_zero_drops(self):
        a = _series("A", [("2013-01-01", 1.0), ("2013-01-02", 2.0)])
        b = _series("B", [("2013-01-01", 3.0), ("2013-01-02", 4.0)])
        panel = md.align([a, b])
        assert panel.dropped_rows == {"A": 0, "B": 0}
        assert len(panel) == 2

    def test_disjoint_calendars(self):
        a = _series("A", [("2013-01-01", 1.0)])
        b = _series("B", [("2013-01-02", 2.0)])
        with pytest.raises(EmptyIntersection):
            md.align([a, b])

    def test_requires_two_series(self):
        a = _series("A", [("2013-01-01", 1.0)])
        with pytest.raises(ValueError):
            md.align([a])

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        base = dt.date(2013, 1, 1)
        def random_series(sym, skip):
            pairs = [((base + dt.timedelta(days=i)).isoformat(), float(rng.uniform(10, 20)))
                     for i in range(30) if i % skip != 0]
            return _series(sym, pairs)
        panel = md.align([random_series("A", 7), random_series("B", 5), random_series("C", 11)])
        again = md.align(md.panel_as_series(panel))
        assert again.dates == panel.dates
        for sym in panel.columns:
            assert np.array_equal(again.columns[sym], panel.columns[sym])
        assert all(v == 0 for v in again.dropped_rows.values())

    def test_drop_count_bookkeeping(self):
        rng = np.random.default_rng(4)
        base = dt.date(2013, 1, 1)
        series = []
        for k, sym in enumerate("ABCD"):
            days = sorted(rng.choice(60, size=40 + k, replace=False).tolist())
            pairs = [((base + dt.timedelta(days=int(d))).isoformat(), float(rng.uniform(1, 9)))
                     for d in days]
            series.append(_series(sym, pairs))
        panel = md.align(series)
        total = sum(len(s) - len(panel) for s in series)
        assert sum(panel.dropped_rows.values()) == total

    def test_alignment_report(self, tmp_path):
        a = _series("A", [("2013-01-01", 1.0), ("2013-01-02", 2.0), ("2013-01-03", 3.0)])
        b = _series("B", [("2013-01-02", 5.0), ("2013-01-03", 6.0)])
        panel = md.align([a, b])
        path = tmp_path / "report.csv"
        md.write_alignment_report(panel, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "symbol,rows_in,rows_kept,rows_dropped"
        assert lines[1] == "A,3,2,1"
        assert lines[2] == "B,2,2,0"


class TestLogReturns:
    def test_constant_prices_zero_returns(self):
        assert md.log_returns([100.0, 100.0, 100.0]).tolist() == [0.0, 0.0]

    def test_e_fold_rise_unit_return(self):
        returns = md.log_returns([100.0, 100.0 * math.e])
        assert returns.shape == (1,)
        assert returns[0] == pytest.approx(1.0, abs=1e-14)

    def test_hand_evaluated_values(self):
        # independently evaluated: ln(1.1), ln(0.9)
        returns = md.log_returns([100.0, 110.0, 99.0])
        assert returns[0] == pytest.approx(0.09531017980432493, abs=1e-12)
        assert returns[1] == pytest.approx(-0.10536051565782628, abs=1e-12)

    def test_geometric_sequence_gives_constant(self):
        prices = 50.0 * 1.02 ** np.arange(25)
        returns = md.log_returns(prices)
        assert np.allclose(returns, math.log(1.02), atol=1e-12)

    def test_too_short(self):
        with pytest.raises(TooShort):
            md.log_returns([100.0])

    def test_non_positive_price(self):
        with pytest.raises(NonPositivePrice):
            md.log_returns([100.0, -1.0, 50.0])


class TestSliceWindow:
    @pytest.fixture
    def panel(self):
        a = _series("A", [("2013-01-01", 1.0), ("2013-01-02", 2.0), ("2013-01-03", 3.0)])
        b = _series("B", [("2013-01-01", 4.0), ("2013-01-02", 5.0), ("2013-01-03", 6.0)])
        return md.align([a, b])

    def test_full_range_identity(self, panel):
        sliced = md.slice_window(panel, dt.date(2013, 1, 1), dt.date(2013, 1, 3))
        assert sliced.dates == panel.dates
        assert np.array_equal(sliced.columns["A"], panel.columns["A"])

    def test_single_row(self, panel):
        sliced = md.slice_window(panel, dt.date(2013, 1, 2), dt.date(2013, 1, 2))
        assert len(sliced) == 1
        assert sliced.columns["B"].tolist() == [5.0]

    def test_empty_window(self, panel):
        with pytest.raises(EmptyWindow):
            md.slice_window(panel, dt.date(2014, 1, 1), dt.date(2014, 2, 1))

    def test_start_after_end(self, panel):
        with pytest.raises(ValueError):
            md.slice_window(panel, dt.date(2013, 1, 3), dt.date(2013, 1, 1))
