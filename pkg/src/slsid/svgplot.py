"""Tiny static SVG writer: axes, scatter glyphs, quartile boxes.

Figures here are batch outputs, not an interactive surface, so this stays
dependency-free: each renderer returns a complete SVG document string.
"""

from __future__ import annotations

import math

WIDTH, HEIGHT = 720, 480
MARGIN = 64
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-12 * step:
        ticks.append(round(v, 12))
        v += step
    return ticks


class Figure:
    """Pixel-space canvas with one data coordinate frame."""

    def __init__(self, xlim, ylim, title="", xlabel="", ylabel=""):
        self.xlim, self.ylim = xlim, ylim
        self.parts: list[str] = []
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel

    def _px(self, x: float) -> float:
        x0, x1 = self.xlim
        frac = (x - x0) / (x1 - x0) if x1 > x0 else 0.5
        return MARGIN + frac * (WIDTH - 2 * MARGIN)

    def _py(self, y: float) -> float:
        y0, y1 = self.ylim
        frac = (y - y0) / (y1 - y0) if y1 > y0 else 0.5
        return HEIGHT - MARGIN - frac * (HEIGHT - 2 * MARGIN)

    def circle(self, x, y, radius=3.0, color="#1f77b4", opacity=0.75):
        self.parts.append(
            f'<circle cx="{self._px(x):.2f}" cy="{self._py(y):.2f}" '
            f'r="{radius}" fill="{color}" fill-opacity="{opacity}"/>'
        )

    def line(self, x0, y0, x1, y1, color="#444444", width=1.0, dash=""):
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{self._px(x0):.2f}" y1="{self._py(y0):.2f}" '
            f'x2="{self._px(x1):.2f}" y2="{self._py(y1):.2f}" '
            f'stroke="{color}" stroke-width="{width}"{dash_attr}/>'
        )

    def box(self, x, half_width, whisk_lo, q1, med, q3, whisk_hi, color="#1f77b4"):
        xl, xr = x - half_width, x + half_width
        px_l, px_r = self._px(xl), self._px(xr)
        self.parts.append(
            f'<rect x="{px_l:.2f}" y="{self._py(q3):.2f}" '
            f'width="{px_r - px_l:.2f}" height="{self._py(q1) - self._py(q3):.2f}" '
            f'fill="{color}" fill-opacity="0.25" stroke="{color}"/>'
        )
        self.line(xl, med, xr, med, color=color, width=2.0)
        self.line(x, q3, x, whisk_hi, color=color)
        self.line(x, whisk_lo, x, q1, color=color)
        self.line(x - half_width / 2, whisk_hi, x + half_width / 2, whisk_hi, color=color)
        self.line(x - half_width / 2, whisk_lo, x + half_width / 2, whisk_lo, color=color)

    def text_px(self, px, py, s, size=12, anchor="middle", rotate=None, color="#222222"):
        rot = f' transform="rotate(-90 {px:.1f} {py:.1f})"' if rotate else ""
        self.parts.append(
            f'<text x="{px:.1f}" y="{py:.1f}" font-size="{size}" '
            f'font-family="sans-serif" fill="{color}" text-anchor="{anchor}"{rot}>{s}</text>'
        )

    def _axes(self, xticks=None, xtick_labels=None):
        self.parts.append(
            f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" '
            f'height="{HEIGHT - 2 * MARGIN}" fill="none" stroke="#222222"/>'
        )
        if xticks is None:
            xticks = _nice_ticks(*self.xlim)
            xtick_labels = [f"{t:g}" for t in xticks]
        for t, lab in zip(xticks, xtick_labels):
            px = self._px(t)
            self.parts.append(
                f'<line x1="{px:.1f}" y1="{HEIGHT - MARGIN}" x2="{px:.1f}" '
                f'y2="{HEIGHT - MARGIN + 5}" stroke="#222222"/>'
            )
            self.text_px(px, HEIGHT - MARGIN + 20, lab)
        for t in _nice_ticks(*self.ylim):
            py = self._py(t)
            self.parts.append(
                f'<line x1="{MARGIN - 5}" y1="{py:.1f}" x2="{MARGIN}" '
                f'y2="{py:.1f}" stroke="#222222"/>'
            )
            self.text_px(MARGIN - 9, py + 4, f"{t:g}", anchor="end")
        if self.title:
            self.text_px(WIDTH / 2, MARGIN - 18, self.title, size=15)
        if self.xlabel:
            self.text_px(WIDTH / 2, HEIGHT - MARGIN + 42, self.xlabel)
        if self.ylabel:
            self.text_px(MARGIN - 44, HEIGHT / 2, self.ylabel, rotate=True)

    def legend(self, entries):
        x0, y0 = WIDTH - MARGIN - 150, MARGIN + 8
        for i, (label, color) in enumerate(entries):
            y = y0 + 18 * i
            self.parts.append(
                f'<circle cx="{x0}" cy="{y - 4}" r="4" fill="{color}"/>'
            )
            self.text_px(x0 + 10, y, label, anchor="start")

    def render(self, xticks=None, xtick_labels=None) -> str:
        self._axes(xticks, xtick_labels)
        body = "\n".join(self.parts)
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">\n'
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>\n'
            f"{body}\n</svg>\n"
        )


def _finite(values):
    return [v for v in values if math.isfinite(v)]


def scatter_svg(series, title="", xlabel="", ylabel="", diagonal=False) -> str:
    """series: iterable of (label, xs, ys); one color per label."""
    xs_all = _finite([x for _, xs, _ in series for x in xs])
    ys_all = _finite([y for _, _, ys in series for y in ys])
    if not xs_all:
        xs_all, ys_all = [0.0, 1.0], [0.0, 1.0]
    pad = lambda lo, hi: ((lo - 0.06 * (hi - lo or 1.0)), (hi + 0.06 * (hi - lo or 1.0)))
    fig = Figure(pad(min(xs_all), max(xs_all)), pad(min(ys_all), max(ys_all)),
                 title=title, xlabel=xlabel, ylabel=ylabel)
    if diagonal:
        lo = max(fig.xlim[0], fig.ylim[0])
        hi = min(fig.xlim[1], fig.ylim[1])
        if hi > lo:
            fig.line(lo, lo, hi, hi, color="#888888", dash="4 3")
    entries = []
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        entries.append((label, color))
        for x, y in zip(xs, ys):
            if math.isfinite(x) and math.isfinite(y):
                fig.circle(x, y, color=color)
    fig.legend(entries)
    return fig.render()


def box_svg(groups, title="", xlabel="", ylabel="") -> str:
    """groups: iterable of (label, values); draws quartile boxes with whiskers."""
    import statistics

    cleaned = [(label, sorted(_finite(vals))) for label, vals in groups]
    cleaned = [(l, v) for l, v in cleaned if v]
    if not cleaned:
        cleaned = [("empty", [0.0])]
    ymin = min(v[0] for _, v in cleaned)
    ymax = max(v[-1] for _, v in cleaned)
    span = (ymax - ymin) or 1.0
    fig = Figure((0.0, float(len(cleaned) + 1)),
                 (ymin - 0.08 * span, ymax + 0.08 * span),
                 title=title, xlabel=xlabel, ylabel=ylabel)
    for i, (label, vals) in enumerate(cleaned, start=1):
        if len(vals) >= 2:
            q = statistics.quantiles(vals, n=4, method="inclusive")
            q1, med, q3 = q[0], q[1], q[2]
        else:
            q1 = med = q3 = vals[0]
        fig.box(float(i), 0.3, vals[0], q1, med, q3, vals[-1],
                color=PALETTE[(i - 1) % len(PALETTE)])
    ticks = [float(i) for i in range(1, len(cleaned) + 1)]
    return fig.render(xticks=ticks, xtick_labels=[l for l, _ in cleaned])
