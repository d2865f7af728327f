"""Small SVG writer for the study plots (no plotting library needed)."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _fmt_tick(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-2:
        return f"{v:.0e}"
    return f"{v:.3g}"


class Canvas:
    """An SVG document with one rectangular plot area and linear or log axes."""

    def __init__(self, width=640, height=420, margin=(60, 20, 40, 70)):
        self.width, self.height = width, height
        self.top, self.right, self.bottom, self.left = margin
        self.parts: list[str] = []
        self.xlim = (0.0, 1.0)
        self.ylim = (0.0, 1.0)
        self.xlog = self.ylog = False

    # -- coordinates -------------------------------------------------------
    def set_axes(self, xlim, ylim, xlog=False, ylog=False):
        self.xlog, self.ylog = xlog, ylog
        self.xlim = tuple(map(float, xlim))
        self.ylim = tuple(map(float, ylim))

    def _t(self, v, lim, log):
        lo, hi = lim
        if log:
            v, lo, hi = math.log10(max(v, 1e-300)), math.log10(lo), math.log10(hi)
        return 0.5 if hi == lo else (v - lo) / (hi - lo)

    def px(self, x):
        return self.left + self._t(x, self.xlim, self.xlog) * (self.width - self.left - self.right)

    def py(self, y):
        return self.height - self.bottom - self._t(y, self.ylim, self.ylog) * (self.height - self.top - self.bottom)

    # -- primitives ----------------------------------------------------------
    def add(self, element: str):
        self.parts.append(element)

    def text(self, x, y, s, size=12, anchor="middle", rotate=None, color="#000"):
        tr = f' transform="rotate({rotate} {x:.1f} {y:.1f})"' if rotate is not None else ""
        self.add(f'<text x="{x:.1f}" y="{y:.1f}" font-size="{size}" text-anchor="{anchor}" '
                 f'font-family="sans-serif" fill="{color}"{tr}>{escape(str(s))}</text>')

    def line(self, x1, y1, x2, y2, color="#000", width=1.0, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.add(f'<line x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" y2="{y2:.1f}" stroke="{color}" stroke-width="{width}"{d}/>')

    def rect(self, x, y, w, h, fill="none", stroke="none", width=1.0, title=None):
        t = f"<title>{escape(title)}</title>" if title else ""
        self.add(f'<rect x="{x:.1f}" y="{y:.1f}" width="{w:.1f}" height="{h:.1f}" fill="{fill}" '
                 f'stroke="{stroke}" stroke-width="{width}">{t}</rect>')

    def polyline(self, xs, ys, color, width=1.5, opacity=1.0):
        pts = " ".join(f"{self.px(x):.1f},{self.py(y):.1f}" for x, y in zip(xs, ys))
        self.add(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}" stroke-opacity="{opacity}"/>')

    def circle(self, x, y, color, r=3.0):
        self.add(f'<circle cx="{self.px(x):.1f}" cy="{self.py(y):.1f}" r="{r}" fill="{color}" fill-opacity="0.8"/>')

    # -- decorations -------------------------------------------------------------
    def frame(self, title="", xlabel="", ylabel="", xticks=None, yticks=None):
        x0, x1 = self.left, self.width - self.right
        y0, y1 = self.top, self.height - self.bottom
        self.rect(x0, y0, x1 - x0, y1 - y0, stroke="#000")
        for v in (yticks if yticks is not None else _ticks(self.ylim, self.ylog)):
            y = self.py(v)
            self.line(x0 - 4, y, x0, y)
            self.line(x0, y, x1, y, color="#ddd", width=0.5)
            self.text(x0 - 6, y + 4, _fmt_tick(v), size=10, anchor="end")
        if xticks is None:
            xticks = [(v, _fmt_tick(v)) for v in _ticks(self.xlim, self.xlog)]
        for v, label in xticks:
            x = self.px(v)
            self.line(x, y1, x, y1 + 4)
            self.text(x, y1 + 16, label, size=10)
        if title:
            self.text(self.width / 2, self.top / 2 + 6, title, size=14)
        if xlabel:
            self.text((x0 + x1) / 2, self.height - 8, xlabel)
        if ylabel:
            self.text(16, (y0 + y1) / 2, ylabel, rotate=-90)

    def legend(self, entries):
        x = self.width - self.right - 150
        y = self.top + 14
        for label, color in entries:
            self.rect(x, y - 9, 10, 10, fill=color)
            self.text(x + 16, y, label, size=11, anchor="start")
            y += 16

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">\n<rect width="100%" height="100%" fill="#fff"/>\n')
        return head + "\n".join(self.parts) + "\n</svg>\n"


def _ticks(lim, log, n=5):
    lo, hi = lim
    if log:
        a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
        step = max(1, (b - a) // 6)
        return [10.0**e for e in range(a, b + 1, step) if lo <= 10.0**e <= hi]
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _range(values, log=False, pad=0.05):
    vals = [v for v in values if math.isfinite(v) and (v > 0 or not log)]
    if not vals:
        return (1e-12, 1.0) if log else (0.0, 1.0)
    lo, hi = min(vals), max(vals)
    if log:
        if lo == hi:
            return lo / 10, hi * 10
        return lo / 10**(pad * 4), hi * 10**(pad * 4)
    span = hi - lo or abs(hi) or 1.0
    return lo - pad * span, hi + pad * span


def box_plot(groups: dict[str, list[float]], title="", ylabel="", log=True) -> str:
    """One box (quartiles, median, min/max whiskers, points) per group."""
    c = Canvas()
    labels = list(groups)
    allv = [v for vs in groups.values() for v in vs]
    c.set_axes((0.5, len(labels) + 0.5), _range(allv, log), ylog=log)
    c.frame(title, "", ylabel, xticks=[(i + 1, lab) for i, lab in enumerate(labels)])
    for i, lab in enumerate(labels):
        vals = sorted(v for v in groups[lab] if math.isfinite(v) and (v > 0 or not log))
        if not vals:
            continue
        color = PALETTE[i % len(PALETTE)]
        q1, med, q3 = (_quantile(vals, q) for q in (0.25, 0.5, 0.75))
        xc = c.px(i + 1)
        half = 0.25 * (c.px(2) - c.px(1))
        c.line(xc, c.py(vals[0]), xc, c.py(vals[-1]), color=color)
        c.rect(xc - half, c.py(q3), 2 * half, max(c.py(q1) - c.py(q3), 1.0), fill="#fff", stroke=color, width=1.5)
        c.line(xc - half, c.py(med), xc + half, c.py(med), color=color, width=2.0)
        for v in vals:
            c.circle(i + 1, v, color, r=2.0)
    return c.render()


def _quantile(sorted_vals, q):
    if len(sorted_vals) == 1:
        return sorted_vals[0]
    pos = q * (len(sorted_vals) - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(sorted_vals) - 1)
    return sorted_vals[lo] + (pos - lo) * (sorted_vals[hi] - sorted_vals[lo])


def scatter(series: dict[str, list[tuple[float, float]]], title="", xlabel="", ylabel="",
            hlines: dict[str, float] | None = None) -> str:
    """Labelled point clouds with optional dashed reference lines."""
    c = Canvas()
    xs = [p[0] for pts in series.values() for p in pts]
    ys = [p[1] for pts in series.values() for p in pts] + list((hlines or {}).values())
    c.set_axes(_range(xs), _range(ys))
    c.frame(title, xlabel, ylabel)
    x0, x1 = c.left, c.width - c.right
    for name, v in (hlines or {}).items():
        c.line(x0, c.py(v), x1, c.py(v), color="#555", dash="5,4")
        c.text(x1 - 4, c.py(v) - 4, name, size=10, anchor="end", color="#555")
    legend = []
    for i, (name, pts) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        for x, y in pts:
            c.circle(x, y, color)
        legend.append((name, color))
    c.legend(legend)
    return c.render()


def lines(series: dict[str, tuple[list[float], list[float]]], title="", xlabel="", ylabel="",
          errors: dict[str, list[float]] | None = None, xlog=False, ylog=False, opacity=1.0,
          colors: dict[str, str] | None = None, legend=True) -> str:
    """Line plot; ``errors`` adds symmetric +-bars per point."""
    c = Canvas()
    errors = errors or {}
    xs = [x for sx, _ in series.values() for x in sx]
    ys = []
    for name, (_, sy) in series.items():
        err = errors.get(name, [0.0] * len(sy))
        ys += [y + e for y, e in zip(sy, err)] + [y - e for y, e in zip(sy, err)]
    c.set_axes(_range(xs, xlog, pad=0.0 if not xlog else 0.05), _range(ys, ylog), xlog=xlog, ylog=ylog)
    c.frame(title, xlabel, ylabel)
    entries = []
    for i, (name, (sx, sy)) in enumerate(series.items()):
        color = (colors or {}).get(name, PALETTE[i % len(PALETTE)])
        c.polyline(sx, sy, color, opacity=opacity)
        if name in errors:
            lo_y = c.ylim[0]
            for x, y, e in zip(sx, sy, errors[name]):
                y_lo = max(y - e, lo_y) if ylog else y - e
                c.line(c.px(x), c.py(y_lo), c.px(x), c.py(y + e), color=color)
                c.circle(x, y, color)
        entries.append((name, color))
    if legend:
        seen = {}
        for name, color in entries:
            seen.setdefault(name.split("#")[0], color)
        c.legend(list(seen.items())[:8])
    return c.render()


def heatmap(matrix, threshold=1e-6, title="", n_split: int | None = None) -> str:
    """``log10 |a_ij|`` colour map; entries below ``threshold`` are drawn black."""
    rows = len(matrix)
    cols = len(matrix[0]) if rows else 0
    size = 520
    c = Canvas(width=size + 140, height=size + 80, margin=(50, 120, 30, 20))
    cell = size / max(rows, cols, 1)
    mags = [abs(v) for row in matrix for v in row if abs(v) >= threshold and math.isfinite(v)]
    lo = math.log10(min(mags)) if mags else 0.0
    hi = math.log10(max(mags)) if mags else 1.0
    for i, row in enumerate(matrix):
        for j, v in enumerate(row):
            a = abs(v)
            if not math.isfinite(a) or a < threshold:
                fill = "#000"
            else:
                t = 0.5 if hi == lo else (math.log10(a) - lo) / (hi - lo)
                fill = _viridis_like(t)
            c.rect(c.left + j * cell, c.top + i * cell, cell + 0.3, cell + 0.3, fill=fill,
                   title=f"[{i},{j}] = {v:.3e}")
    if n_split:
        p = c.left + n_split * cell
        c.line(p, c.top, p, c.top + rows * cell, color="#fff", width=1.5)
        q = c.top + n_split * cell
        c.line(c.left, q, c.left + cols * cell, q, color="#fff", width=1.5)
    c.text(c.left + cols * cell / 2, 30, title, size=14)
    bx = c.left + cols * cell + 20
    for k in range(50):
        c.rect(bx, c.top + (49 - k) * size / 50, 20, size / 50 + 0.5, fill=_viridis_like(k / 49))
    c.text(bx + 24, c.top + 10, f"1e{hi:.1f}", size=10, anchor="start")
    c.text(bx + 24, c.top + size, f"1e{lo:.1f}", size=10, anchor="start")
    c.rect(bx, c.top + size + 10, 20, 12, fill="#000")
    c.text(bx + 24, c.top + size + 20, f"< {threshold:g}", size=10, anchor="start")
    return c.render()


def _viridis_like(t: float) -> str:
    stops = ((68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37))
    t = min(max(t, 0.0), 1.0) * (len(stops) - 1)
    k = min(int(t), len(stops) - 2)
    f = t - k
    r, g, b = (round(a + f * (b_ - a)) for a, b_ in zip(stops[k], stops[k + 1]))
    return f"#{r:02x}{g:02x}{b:02x}"
