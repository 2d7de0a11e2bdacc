"""Self-contained SVG charts plus the CSV of the plotted series.

Output is a pure function of the input reports: no timestamps, no random
ids, numbers formatted with a fixed precision.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

from ..core import MetricReport, atomic_write_bytes
from ..metrics import CuCsiGrid, histogram

RENDER_KINDS = ("histogram", "scatter", "grid-heatmap", "line")

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 60


class RenderError(ValueError):
    pass


def _num(v: float) -> str:
    return f"{v:.6g}"


def _scalars(report: MetricReport) -> list[tuple[int, float]]:
    if not report.per_sample:
        raise RenderError(f"report {report.metric_name!r} has no per-sample values")
    out = []
    for sid in report.ids:
        v = report.per_sample[sid]
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            out.append((sid, float(v)))
    if not out:
        raise RenderError(f"report {report.metric_name!r} has no scalar per-sample values")
    return out


def _csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_num(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


class _Axes:
    def __init__(self, xlo: float, xhi: float, ylo: float, yhi: float):
        if xhi <= xlo:
            xhi = xlo + 1.0
        if yhi <= ylo:
            yhi = ylo + 1.0
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo, yhi
        self.pw = WIDTH - LEFT - RIGHT
        self.ph = HEIGHT - TOP - BOTTOM

    def x(self, v: float) -> float:
        return LEFT + (v - self.xlo) / (self.xhi - self.xlo) * self.pw

    def y(self, v: float) -> float:
        return TOP + self.ph - (v - self.ylo) / (self.yhi - self.ylo) * self.ph


def _frame(title: str, xlabel: str, ylabel: str, body: list[str], ax: _Axes | None) -> str:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
    ]
    parts += body
    x0, y0 = LEFT, HEIGHT - BOTTOM
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{WIDTH - RIGHT}" y2="{y0}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{TOP}" x2="{x0}" y2="{y0}" stroke="black"/>')
    if ax is not None:
        for k in range(5):
            xv = ax.xlo + (ax.xhi - ax.xlo) * k / 4
            yv = ax.ylo + (ax.yhi - ax.ylo) * k / 4
            parts.append(f'<text x="{ax.x(xv):.2f}" y="{y0 + 16}" text-anchor="middle" font-family="sans-serif" '
                         f'font-size="10">{_num(xv)}</text>')
            parts.append(f'<text x="{x0 - 6}" y="{ax.y(yv) + 3:.2f}" text-anchor="end" font-family="sans-serif" '
                         f'font-size="10">{_num(yv)}</text>')
    parts.append(f'<text x="{LEFT + (WIDTH - LEFT - RIGHT) / 2}" y="{HEIGHT - 18}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12">{escape(xlabel)}</text>')
    parts.append(f'<text x="16" y="{TOP + (HEIGHT - TOP - BOTTOM) / 2}" text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12" transform="rotate(-90 16 {TOP + (HEIGHT - TOP - BOTTOM) / 2})">{escape(ylabel)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _render_histogram(reports: Sequence[MetricReport], n_bins: int) -> tuple[str, str]:
    if len(reports) != 1:
        raise RenderError("histogram takes exactly one report")
    rep = reports[0]
    hist = rep.histograms[0] if rep.histograms else histogram([v for _, v in _scalars(rep)], n_bins)
    edges, counts = list(hist.edges), list(hist.counts)
    ax = _Axes(edges[0], edges[-1], 0.0, max(counts) or 1.0)
    body = []
    for k, c in enumerate(counts):
        x0, x1 = ax.x(edges[k]), ax.x(edges[k + 1])
        body.append(f'<rect x="{x0:.2f}" y="{ax.y(c):.2f}" width="{max(x1 - x0 - 1, 0.5):.2f}" '
                    f'height="{ax.y(0) - ax.y(c):.2f}" fill="steelblue"/>')
    rows = [(float(edges[k]), float(edges[k + 1]), int(c)) for k, c in enumerate(counts)]
    svg = _frame(f"{rep.metric_name} distribution", rep.metric_name, "count", body, ax)
    return svg, _csv(["bin_lo", "bin_hi", "count"], rows)


def _render_scatter(reports: Sequence[MetricReport]) -> tuple[str, str]:
    if len(reports) != 2:
        raise RenderError("scatter takes two reports (x then y)")
    xs, ys = dict(_scalars(reports[0])), dict(_scalars(reports[1]))
    ids = sorted(set(xs) & set(ys))
    if not ids:
        raise RenderError("scatter reports share no sample ids")
    xv, yv = [xs[i] for i in ids], [ys[i] for i in ids]
    ax = _Axes(min(xv), max(xv), min(yv), max(yv))
    body = [f'<circle cx="{ax.x(a):.2f}" cy="{ax.y(b):.2f}" r="2.5" fill="steelblue"/>' for a, b in zip(xv, yv)]
    xn, yn = reports[0].metric_name, reports[1].metric_name
    svg = _frame(f"{yn} vs {xn}", xn, yn, body, ax)
    return svg, _csv(["sample_id", xn, yn], [(i, xs[i], ys[i]) for i in ids])


def _heat_color(frac: float) -> str:
    # white -> dark blue
    r = round(255 * (1 - frac) + 8 * frac)
    g = round(255 * (1 - frac) + 48 * frac)
    b = round(255 * (1 - frac) + 107 * frac)
    return f"#{r:02x}{g:02x}{b:02x}"


def _render_grid(reports: Sequence[MetricReport]) -> tuple[str, str]:
    if len(reports) != 1 or "grid" not in reports[0].extra:
        raise RenderError("grid-heatmap takes one report carrying a CuCSI grid")
    if not reports[0].per_sample:
        raise RenderError(f"report {reports[0].metric_name!r} has no per-sample values")
    grid = CuCsiGrid.from_dict(reports[0].extra["grid"])
    counts = grid.counts
    n_leads, n_bins = counts.shape
    peak = int(counts.max()) or 1
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM
    cw, chh = pw / n_bins, ph / n_leads
    body, rows = [], []
    for lead in range(n_leads):
        for b in range(n_bins):
            c = int(counts[lead, b])
            body.append(f'<rect x="{LEFT + b * cw:.2f}" y="{TOP + lead * chh:.2f}" width="{cw:.2f}" height="{chh:.2f}" '
                        f'fill="{_heat_color(c / peak)}"/>')
            rows.append((lead + 1, b, _num(b * grid.s), c))
    for b in range(0, n_bins, 5):
        body.append(f'<text x="{LEFT + (b + 0.5) * cw:.2f}" y="{HEIGHT - BOTTOM + 16}" text-anchor="middle" '
                    f'font-family="sans-serif" font-size="10">{_num(b * grid.s)}</text>')
    for lead in range(0, n_leads, 5):
        body.append(f'<text x="{LEFT - 6}" y="{TOP + (lead + 0.6) * chh:.2f}" text-anchor="end" '
                    f'font-family="sans-serif" font-size="10">{lead + 1}</text>')
    svg = _frame(f"CuCSI T={_num(grid.T)} ({len(grid.event_ids)} events)", "CSI bin", "lead time", body, None)
    return svg, _csv(["lead_time", "csi_bin", "bin_lo", "count"], rows)


def _line_x(rep: MetricReport, k: int) -> float:
    coords = (rep.scope or {}).get("coords") or {}
    for v in coords.values():
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            return float(v)
    return float(k)


def _render_line(reports: Sequence[MetricReport]) -> tuple[str, str]:
    if not reports:
        raise RenderError("line needs at least one report")
    if len(reports) == 1:
        pts = [(float(sid), v) for sid, v in _scalars(reports[0])]
        xlabel = "sample id"
    else:
        pts = []
        for k, rep in enumerate(reports):
            _scalars(rep)
            pts.append((_line_x(rep, k), float(rep.aggregates["mean"])))
        pts.sort()
        coords = (reports[0].scope or {}).get("coords") or {}
        xlabel = next(iter(coords), "cell")
    name = reports[0].metric_name
    xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    ax = _Axes(min(xs), max(xs), min(0.0, min(ys)), max(ys))
    path = " ".join(f"{'M' if k == 0 else 'L'}{ax.x(a):.2f},{ax.y(b):.2f}" for k, (a, b) in enumerate(pts))
    body = [f'<path d="{path}" fill="none" stroke="steelblue" stroke-width="1.5"/>']
    body += [f'<circle cx="{ax.x(a):.2f}" cy="{ax.y(b):.2f}" r="2.5" fill="steelblue"/>' for a, b in pts]
    svg = _frame(name, xlabel, name, body, ax)
    return svg, _csv([xlabel, name], pts)


def render_report(reports: Sequence[MetricReport], kind: str, n_bins: int = 16) -> tuple[str, str]:
    """Return (svg, csv) text for ``kind`` in histogram, scatter, grid-heatmap, line."""
    reports = list(reports)
    if kind == "histogram":
        return _render_histogram(reports, n_bins)
    if kind == "scatter":
        return _render_scatter(reports)
    if kind == "grid-heatmap":
        return _render_grid(reports)
    if kind == "line":
        return _render_line(reports)
    raise RenderError(f"unknown render kind {kind!r}; expected one of {RENDER_KINDS}")


def write_rendering(reports: Sequence[MetricReport], kind: str, stem: Path, n_bins: int = 16) -> tuple[Path, Path]:
    svg, table = render_report(reports, kind, n_bins)
    stem = Path(stem)
    svg_path, csv_path = stem.with_suffix(".svg"), stem.with_suffix(".csv")
    atomic_write_bytes(svg_path, svg.encode("utf-8"))
    atomic_write_bytes(csv_path, table.encode("utf-8"))
    return svg_path, csv_path

