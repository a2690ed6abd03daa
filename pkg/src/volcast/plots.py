"""Self-contained SVG charts with CSV sidecars.

No plotting dependency: figures are assembled as flat SVG text, so outputs
are diffable and render anywhere.  Every chart writes a sidecar CSV (same
stem, .csv suffix) holding exactly the plotted points.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from volcast.errors import EmptyIntersection

_FONT = 'font-family="Helvetica, Arial, sans-serif"'
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e")


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-9 * step:
        out.append(round(t, 12))
        t += step
    return out


class _Frame:
    """Maps data coordinates into one plot rectangle and draws its axes."""

    def __init__(self, x0, y0, width, height, xlim, ylim):
        self.x0, self.y0, self.w, self.h = x0, y0, width, height
        self.xmin, self.xmax = xlim
        self.ymin, self.ymax = ylim
        if self.xmax <= self.xmin:
            self.xmax = self.xmin + 1.0
        if self.ymax <= self.ymin:
            self.ymax = self.ymin + 1.0

    def px(self, x):
        return self.x0 + (x - self.xmin) / (self.xmax - self.xmin) * self.w

    def py(self, y):
        return self.y0 + self.h - (y - self.ymin) / (self.ymax - self.ymin) * self.h

    def axes(self, title="", x_tick_labels=None):
        el = [f'<rect x="{self.x0}" y="{self.y0}" width="{self.w}" height="{self.h}" '
              'fill="none" stroke="#333" stroke-width="1"/>']
        for t in _ticks(self.ymin, self.ymax):
            y = self.py(t)
            el.append(f'<line x1="{self.x0 - 4}" y1="{y:.2f}" x2="{self.x0}" y2="{y:.2f}" stroke="#333"/>')
            el.append(f'<text x="{self.x0 - 7}" y="{y + 4:.2f}" text-anchor="end" '
                      f'font-size="11" {_FONT}>{t:g}</text>')
        if x_tick_labels is None:
            for t in _ticks(self.xmin, self.xmax):
                x = self.px(t)
                el.append(f'<line x1="{x:.2f}" y1="{self.y0 + self.h}" x2="{x:.2f}" '
                          f'y2="{self.y0 + self.h + 4}" stroke="#333"/>')
                el.append(f'<text x="{x:.2f}" y="{self.y0 + self.h + 16}" text-anchor="middle" '
                          f'font-size="11" {_FONT}>{t:g}</text>')
        else:
            for frac, label in x_tick_labels:
                x = self.x0 + frac * self.w
                el.append(f'<line x1="{x:.2f}" y1="{self.y0 + self.h}" x2="{x:.2f}" '
                          f'y2="{self.y0 + self.h + 4}" stroke="#333"/>')
                el.append(f'<text x="{x:.2f}" y="{self.y0 + self.h + 16}" text-anchor="middle" '
                          f'font-size="11" {_FONT}>{_escape(label)}</text>')
        if title:
            el.append(f'<text x="{self.x0 + self.w / 2:.2f}" y="{self.y0 - 8}" '
                      f'text-anchor="middle" font-size="13" {_FONT}>{_escape(title)}</text>')
        return el

    def polyline(self, xs, ys, color, width=1.5):
        pts = " ".join(f"{self.px(x):.2f},{self.py(y):.2f}" for x, y in zip(xs, ys))
        return (f'<polyline points="{pts}" fill="none" stroke="{color}" '
                f'stroke-width="{width}"/>')

    def line(self, x1, y1, x2, y2, color, dashed=False):
        dash = ' stroke-dasharray="5,4"' if dashed else ""
        return (f'<line x1="{self.px(x1):.2f}" y1="{self.py(y1):.2f}" '
                f'x2="{self.px(x2):.2f}" y2="{self.py(y2):.2f}" stroke="{color}"'
                f'{dash} stroke-width="1.2"/>')

    def dots(self, xs, ys, color, radius=2.2):
        return "".join(f'<circle cx="{self.px(x):.2f}" cy="{self.py(y):.2f}" '
                       f'r="{radius}" fill="{color}" fill-opacity="0.55"/>'
                       for x, y in zip(xs, ys))


def _document(width, height, elements, title=""):
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             '<rect width="100%" height="100%" fill="#ffffff"/>']
    if title:
        parts.append(f'<text x="{width / 2}" y="24" text-anchor="middle" '
                     f'font-size="16" {_FONT}>{_escape(title)}</text>')
    parts.extend(elements)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def ols_fit(x, y) -> tuple[float, float]:
    """Least-squares slope and intercept of y on x."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    denom = float(dx @ dx)
    if denom == 0.0:
        return 0.0, float(ym)
    slope = float(dx @ (y - ym)) / denom
    return slope, float(ym - slope * xm)


def _sidecar(path) -> Path:
    return Path(path).with_suffix(".csv")


def emit_regression_plot(actual, predicted, out_path, output_names=("NIFTYSDR", "GOLDSDR")) -> str:
    """Predicted-vs-actual scatter per output, with identity and OLS fit lines.

    Writes the SVG plus a sidecar CSV of the plotted points (one row per
    point per output, 2N rows for two outputs).
    """
    actual = np.asarray(actual, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if actual.shape != predicted.shape:
        raise ValueError(f"shape mismatch: {actual.shape} vs {predicted.shape}")
    if actual.ndim == 1:
        actual = actual[:, None]
        predicted = predicted[:, None]
    n_out = actual.shape[1]

    panel_w, panel_h, gap, margin = 330, 330, 60, 60
    width = margin * 2 + panel_w * n_out + gap * (n_out - 1)
    height = margin * 2 + panel_h
    elements = []
    from volcast.evaluation import pearson_r  # local import avoids a cycle at module load

    for k in range(n_out):
        a, p = actual[:, k], predicted[:, k]
        lo = float(min(a.min(), p.min()))
        hi = float(max(a.max(), p.max()))
        pad = 0.05 * (hi - lo or 1.0)
        frame = _Frame(margin + k * (panel_w + gap), margin, panel_w, panel_h,
                       (lo - pad, hi + pad), (lo - pad, hi + pad))
        name = output_names[k] if k < len(output_names) else f"output {k}"
        elements += frame.axes(title=name)
        elements.append(frame.line(lo - pad, lo - pad, hi + pad, hi + pad, "#999", dashed=True))
        slope, intercept = ols_fit(a, p)
        xs = (lo - pad, hi + pad)
        elements.append(frame.line(xs[0], slope * xs[0] + intercept,
                                   xs[1], slope * xs[1] + intercept, _COLORS[1]))
        elements.append(frame.dots(a, p, _COLORS[0]))
        try:
            r_txt = f"R = {pearson_r(a, p):.4f}"
        except Exception:
            r_txt = "R undefined"
        elements.append(f'<text x="{frame.x0 + 10}" y="{frame.y0 + 18}" font-size="12" '
                        f'{_FONT}>{r_txt}</text>')
        elements.append(f'<text x="{frame.x0 + 10}" y="{frame.y0 + 34}" font-size="11" '
                        f'{_FONT}>fit: y = {slope:.4f}x + {intercept:+.4f}</text>')
        elements.append(f'<text x="{frame.x0 + frame.w / 2}" y="{frame.y0 + frame.h + 34}" '
                        f'text-anchor="middle" font-size="12" {_FONT}>actual</text>')
    elements.append(f'<text x="18" y="{height / 2}" font-size="12" {_FONT} '
                    f'transform="rotate(-90 18 {height / 2})" text-anchor="middle">predicted</text>')

    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(_document(width, height, elements, title="Predicted vs actual"))
    with open(_sidecar(out_path), "w", encoding="utf-8") as fh:
        fh.write("output,actual,predicted\n")
        for k in range(n_out):
            name = output_names[k] if k < len(output_names) else f"output{k}"
            for a, p in zip(actual[:, k], predicted[:, k]):
                fh.write(f"{name},{float(a)!r},{float(p)!r}\n")
    return str(out_path)


def emit_overlay_plot(series_a, series_b, out_path) -> str:
    """Two dated series as lines on their common dates, with a legend.

    Accepts anything with ``name``, ``dates`` and ``values`` attributes (e.g.
    VolatilitySeries) or ``(name, dates, values)`` tuples.  Raises
    EmptyIntersection when the date ranges do not overlap.
    """
    def unpack(s):
        if hasattr(s, "dates"):
            return s.name, list(s.dates), np.asarray(s.values, dtype=np.float64)
        name, dates, values = s
        return name, list(dates), np.asarray(values, dtype=np.float64)

    name_a, dates_a, vals_a = unpack(series_a)
    name_b, dates_b, vals_b = unpack(series_b)
    common = sorted(set(dates_a) & set(dates_b))
    if not common:
        raise EmptyIntersection(f"no shared dates between {name_a} and {name_b}")
    ia = {d: i for i, d in enumerate(dates_a)}
    ib = {d: i for i, d in enumerate(dates_b)}
    ya = np.array([vals_a[ia[d]] for d in common])
    yb = np.array([vals_b[ib[d]] for d in common])

    width, height, margin = 860, 420, 70
    xs = np.arange(len(common), dtype=float)
    lo = float(min(ya.min(), yb.min()))
    hi = float(max(ya.max(), yb.max()))
    pad = 0.05 * (hi - lo or 1.0)
    frame = _Frame(margin, margin, width - 2 * margin, height - 2 * margin,
                   (0.0, float(len(common) - 1 or 1)), (lo - pad, hi + pad))
    n_labels = min(6, len(common))
    label_idx = np.unique(np.linspace(0, len(common) - 1, n_labels).astype(int))
    tick_labels = [(i / max(len(common) - 1, 1), common[i].isoformat()) for i in label_idx]
    elements = frame.axes(x_tick_labels=tick_labels)
    elements.append(frame.polyline(xs, ya, _COLORS[0]))
    elements.append(frame.polyline(xs, yb, _COLORS[1]))
    for i, name in enumerate((name_a, name_b)):
        y = margin - 26 + i * 16
        elements.append(f'<line x1="{width - margin - 150}" y1="{y}" x2="{width - margin - 120}" '
                        f'y2="{y}" stroke="{_COLORS[i]}" stroke-width="2"/>')
        elements.append(f'<text x="{width - margin - 114}" y="{y + 4}" font-size="12" '
                        f'{_FONT}>{_escape(str(name))}</text>')

    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(_document(width, height, elements, title=f"{name_a} and {name_b}"))
    with open(_sidecar(out_path), "w", encoding="utf-8") as fh:
        fh.write(f"date,{name_a},{name_b}\n")
        for d, va, vb in zip(common, ya, yb):
            fh.write(f"{d.isoformat()},{float(va)!r},{float(vb)!r}\n")
    return str(out_path)


def emit_bar_chart(labels, groups: dict[str, np.ndarray], out_path,
                   y_label: str = "test MSE") -> str:
    """Grouped bars (one group per architecture), one bar per trial label."""
    names = list(groups)
    counts = {len(np.asarray(v)) for v in groups.values()}
    if len(counts) != 1 or counts.pop() != len(labels):
        raise ValueError("each group needs one value per label")

    width, height, margin_l, margin_b = 1000, 430, 80, 120
    margin_t, margin_r = 50, 40
    plot_w = width - margin_l - margin_r
    plot_h = height - margin_t - margin_b
    top = max(float(np.max(np.asarray(v))) for v in groups.values()) * 1.1 or 1.0
    frame = _Frame(margin_l, margin_t, plot_w, plot_h, (0.0, 1.0), (0.0, top))
    elements = frame.axes(x_tick_labels=[])
    slot = plot_w / len(labels)
    bar_w = slot * 0.8 / len(names)
    for gi, gname in enumerate(names):
        vals = np.asarray(groups[gname], dtype=np.float64)
        color = _COLORS[gi % len(_COLORS)]
        for i, v in enumerate(vals):
            x = margin_l + i * slot + slot * 0.1 + gi * bar_w
            y = frame.py(float(v))
            h = margin_t + plot_h - y
            elements.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" '
                            f'height="{h:.2f}" fill="{color}" fill-opacity="0.8"/>')
        ly = margin_t - 16 + gi * 14
        elements.append(f'<rect x="{width - margin_r - 150}" y="{ly - 9}" width="12" height="10" '
                        f'fill="{color}"/>')
        elements.append(f'<text x="{width - margin_r - 132}" y="{ly}" font-size="12" '
                        f'{_FONT}>{_escape(str(gname))}</text>')
    for i, label in enumerate(labels):
        x = margin_l + (i + 0.5) * slot
        y = margin_t + plot_h + 10
        elements.append(f'<text x="{x:.2f}" y="{y:.2f}" font-size="9" {_FONT} '
                        f'transform="rotate(-60 {x:.2f} {y:.2f})" text-anchor="end">'
                        f'{_escape(str(label))}</text>')
    elements.append(f'<text x="20" y="{margin_t + plot_h / 2}" font-size="12" {_FONT} '
                    f'transform="rotate(-90 20 {margin_t + plot_h / 2})" '
                    f'text-anchor="middle">{_escape(y_label)}</text>')

    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(_document(width, height, elements, title="Per-trial test performance"))
    with open(_sidecar(out_path), "w", encoding="utf-8") as fh:
        fh.write("label," + ",".join(names) + "\n")
        for i, label in enumerate(labels):
            cells = [repr(float(np.asarray(groups[n])[i])) for n in names]
            fh.write(f"{label}," + ",".join(cells) + "\n")
    return str(out_path)
