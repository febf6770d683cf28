"""Static two-panel SVG of a detection: series with flags on top, density with peaks below."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .detector import DetectionReport
from .timeseries import TimeSeries

WIDTH, PANEL_H, MARGIN = 900, 220, 48


def _scale(values, lo, hi, out_lo, out_hi):
    values = np.asarray(values, dtype=np.float64)
    span = hi - lo if hi > lo else 1.0
    return out_lo + (values - lo) / span * (out_hi - out_lo)


def _polyline(xs, ys, cls):
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    return f'<polyline class="{cls}" fill="none" points="{pts}"/>'


def render_svg(report: DetectionReport, series: TimeSeries | None = None, labels=None,
               title: str | None = None) -> str:
    """SVG text. Every predicted position appears as a ``data-position`` attribute."""
    if series is not None:
        x_lo, x_hi = float(series.positions[0]), float(series.positions[-1])
    elif len(report.grid):
        x_lo, x_hi = float(report.grid[0]), float(report.grid[-1])
    else:
        x_lo, x_hi = 0.0, 1.0
    left, right = MARGIN, WIDTH - MARGIN // 2
    top1, bot1 = MARGIN // 2 + 16, MARGIN // 2 + 16 + PANEL_H
    top2, bot2 = bot1 + MARGIN, bot1 + MARGIN + PANEL_H
    height = bot2 + MARGIN
    sx = lambda v: _scale(v, x_lo, x_hi, left, right)  # noqa: E731
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
             f'viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">',
             "<style>.series{stroke:#1f4e8c;stroke-width:0.7}.density{stroke:#333;stroke-width:1.2}"
             ".flag{fill:#d62728;opacity:0.5}.prediction{stroke:#2ca02c;stroke-width:1.5}"
             ".label{stroke:#ff7f0e;stroke-width:1;stroke-dasharray:4 3}"
             ".threshold{stroke:#888;stroke-dasharray:2 2}.frame{fill:none;stroke:#000}</style>"]
    name = title or f"{report.segment_id}_{report.inspection_id}".strip("_")
    parts.append(f'<text x="{left}" y="14">{escape(name)}  (wl={report.wl}, bandwidth={report.bandwidth:g})</text>')
    for top, bot in ((top1, bot1), (top2, bot2)):
        parts.append(f'<rect class="frame" x="{left}" y="{top}" width="{right - left}" height="{bot - top}"/>')

    if series is not None:
        v_lo, v_hi = float(series.values.min()), float(series.values.max())
        parts.append(_polyline(sx(series.positions), _scale(series.values, v_lo, v_hi, bot1 - 4, top1 + 4),
                               "series"))
    for m in report.flagged_midpoints:
        parts.append(f'<rect class="flag" x="{sx(m):.2f}" y="{bot1 - 6}" width="1" height="6"/>')

    if len(report.density):
        d_hi = float(report.density.max())
        parts.append(_polyline(sx(report.grid), _scale(report.density, 0.0, d_hi, bot2 - 2, top2 + 8), "density"))
        if report.peak_threshold is not None:
            y = float(_scale(report.peak_threshold, 0.0, d_hi, bot2 - 2, top2 + 8))
            parts.append(f'<line class="threshold" x1="{left}" x2="{right}" y1="{y:.2f}" y2="{y:.2f}"/>')
    for p in (labels.positions if hasattr(labels, "positions") else (labels or ())):
        x = float(sx(p))
        parts.append(f'<line class="label" data-position="{float(p)!r}" x1="{x:.2f}" x2="{x:.2f}" '
                     f'y1="{top1}" y2="{bot2}"/>')
    for p in report.predicted_anomalies:
        x = float(sx(p))
        parts.append(f'<line class="prediction" data-position="{float(p)!r}" x1="{x:.2f}" x2="{x:.2f}" '
                     f'y1="{top2}" y2="{bot2}"><title>{float(p)!r}</title></line>')
    parts.append(f'<text x="{left}" y="{height - 12}">{x_lo:g}</text>')
    parts.append(f'<text x="{right}" y="{height - 12}" text-anchor="end">{x_hi:g}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def save_svg(report: DetectionReport, path, series: TimeSeries | None = None, labels=None) -> Path:
    path = Path(path)
    path.write_text(render_svg(report, series, labels), encoding="utf-8")
    return path
