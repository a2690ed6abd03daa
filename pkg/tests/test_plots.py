import datetime as dt
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from volcast import plots
from volcast.errors import EmptyIntersection
from volcast.features import VolatilitySeries


def _dates(n, start=dt.date(2013, 1, 1)):
    return [start + dt.timedelta(days=i) for i in range(n)]


def _assert_valid_svg(path):
    root = ET.parse(path).getroot()
    assert root.tag.endswith("svg")
    return root


class TestOls:
    def test_matches_closed_form(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            x = rng.normal(size=30)
            y = 2.5 * x - 1.0 + rng.normal(size=30)
            slope, intercept = plots.ols_fit(x, y)
            xm, ym = x.mean(), y.mean()
            ref_slope = float(((x - xm) * (y - ym)).sum() / ((x - xm) ** 2).sum())
            ref_intercept = float(ym - ref_slope * xm)
            assert slope == pytest.approx(ref_slope, abs=1e-10)
            assert intercept == pytest.approx(ref_intercept, abs=1e-10)

    def test_perfect_identity(self):
        x = np.arange(10.0)
        slope, intercept = plots.ols_fit(x, x)
        assert slope == pytest.approx(1.0, abs=1e-12)
        assert intercept == pytest.approx(0.0, abs=1e-12)


class TestRegressionPlot:
    def test_identity_prediction(self, tmp_path):
        rng = np.random.default_rng(1)
        actual = rng.uniform(5, 30, size=(40, 2))
        out = tmp_path / "reg.svg"
        path = plots.emit_regression_plot(actual, actual.copy(), out)
        assert path == str(out)
        _assert_valid_svg(out)
        text = out.read_text()
        assert "R = 1.0000" in text
        assert "y = 1.0000x" in text

    def test_sidecar_has_2n_rows(self, tmp_path):
        rng = np.random.default_rng(2)
        actual = rng.uniform(5, 30, size=(25, 2))
        predicted = actual + rng.normal(size=(25, 2))
        out = tmp_path / "reg.svg"
        plots.emit_regression_plot(actual, predicted, out)
        lines = (tmp_path / "reg.csv").read_text().splitlines()
        assert lines[0] == "output,actual,predicted"
        assert len(lines) == 1 + 2 * 25
        assert lines[1].startswith("NIFTYSDR,")
        assert lines[26].startswith("GOLDSDR,")
        # sidecar holds exactly the plotted values
        a0, p0 = (float(v) for v in lines[1].split(",")[1:])
        assert a0 == actual[0, 0] and p0 == predicted[0, 0]

    def test_shape_mismatch(self, tmp_path):
        with pytest.raises(ValueError):
            plots.emit_regression_plot(np.zeros((4, 2)), np.zeros((5, 2)), tmp_path / "x.svg")


class TestOverlayPlot:
    def test_identical_series(self, tmp_path):
        dates = _dates(30)
        values = np.linspace(10, 20, 30)
        a = VolatilitySeries("NIFTYSDR", tuple(dates), values)
        b = VolatilitySeries("INDIAVIX", tuple(dates), values + 1.0)
        out = tmp_path / "overlay.svg"
        plots.emit_overlay_plot(a, b, out)
        root = _assert_valid_svg(out)
        polylines = [el for el in root.iter() if el.tag.endswith("polyline")]
        assert len(polylines) == 2
        assert "NIFTYSDR" in out.read_text()

    def test_disjoint_dates(self, tmp_path):
        a = ("A", _dates(5), np.arange(5.0))
        b = ("B", _dates(5, start=dt.date(2020, 1, 1)), np.arange(5.0))
        with pytest.raises(EmptyIntersection):
            plots.emit_overlay_plot(a, b, tmp_path / "x.svg")

    def test_sidecar_dates_are_intersection(self, tmp_path):
        dates_a = _dates(10)
        dates_b = _dates(10, start=dt.date(2013, 1, 6))
        a = ("A", dates_a, np.arange(10.0))
        b = ("B", dates_b, np.arange(10.0) + 5)
        out = tmp_path / "overlay.svg"
        plots.emit_overlay_plot(a, b, out)
        lines = (tmp_path / "overlay.csv").read_text().splitlines()
        assert lines[0] == "date,A,B"
        got_dates = [line.split(",")[0] for line in lines[1:]]
        expected = sorted(set(dates_a) & set(dates_b))
        assert got_dates == [d.isoformat() for d in expected]


class TestBarChart:
    def test_basic(self, tmp_path):
        labels = ["LM-20", "LM-30", "BFGS-20"]
        groups = {"MLFF": np.array([1.0, 2.0, 3.0]), "CFFN": np.array([1.5, 2.5, 3.5])}
        out = tmp_path / "bars.svg"
        plots.emit_bar_chart(labels, groups, out)
        root = _assert_valid_svg(out)
        rects = [el for el in root.iter() if el.tag.endswith("rect")]
        assert len(rects) >= 6
        lines = (tmp_path / "bars.csv").read_text().splitlines()
        assert lines[0] == "label,MLFF,CFFN"
        assert len(lines) == 4

    def test_mismatched_lengths(self, tmp_path):
        with pytest.raises(ValueError):
            plots.emit_bar_chart(["a"], {"MLFF": np.array([1.0, 2.0])}, tmp_path / "x.svg")
