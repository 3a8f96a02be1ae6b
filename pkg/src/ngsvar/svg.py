"""Minimal small-multiples SVG writer (line charts only, deterministic output)."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from xml.sax.saxutils import escape

PALETTE = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d")


@dataclass
class Trace:
    y: Sequence[float]
    label: str = ""
    color: str = PALETTE[0]


@dataclass
class Panel:
    title: str
    traces: list[Trace]
    x: Sequence[float] | None = None
    zero_line: bool = False


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def grid_svg(
    panels: Sequence[Panel],
    nrows: int,
    ncols: int,
    title: str = "",
    cell=(180, 130),
    xlabel: str = "",
    legend: Sequence[tuple[str, str]] = (),
) -> str:
    """Render panels row-major into one SVG document.

    Each panel is emitted as ``<g class="panel">`` so the structure can be
    checked without a renderer.
    """
    if len(panels) > nrows * ncols:
        raise ValueError("more panels than grid cells")
    w, h = cell
    top = 30 if title else 8
    bottom = 24 + (18 if legend else 0)
    width, height = ncols * w + 10, top + nrows * h + bottom
    pad_l, pad_r, pad_t, pad_b = 34, 6, 16, 18
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for k, panel in enumerate(panels):
        r, c = divmod(k, ncols)
        x0, y0 = 5 + c * w, top + r * h
        pw, ph = w - pad_l - pad_r, h - pad_t - pad_b
        n = max((len(t.y) for t in panel.traces), default=0)
        xs = list(panel.x) if panel.x is not None else list(range(n))
        ys = [v for t in panel.traces for v in t.y]
        lo, hi = (min(ys), max(ys)) if ys else (0.0, 1.0)
        if panel.zero_line:
            lo, hi = min(lo, 0.0), max(hi, 0.0)
        if hi - lo < 1e-12:
            lo, hi = lo - 1, hi + 1
        xlo, xhi = (xs[0], xs[-1]) if len(xs) > 1 else (0, 1)

        def px(x):
            return x0 + pad_l + (x - xlo) / (xhi - xlo) * pw

        def py(y):
            return y0 + pad_t + (hi - y) / (hi - lo) * ph

        out.append(f'<g class="panel" data-row="{r}" data-col="{c}">')
        out.append(
            f'<rect x="{x0 + pad_l}" y="{y0 + pad_t}" width="{pw}" height="{ph}" '
            f'fill="none" stroke="#999" stroke-width="0.5"/>'
        )
        out.append(
            f'<text x="{x0 + pad_l + pw / 2:.1f}" y="{y0 + 11}" text-anchor="middle" '
            f'font-size="9">{escape(panel.title)}</text>'
        )
        for val, anchor_y in ((hi, py(hi) + 3), (lo, py(lo))):
            out.append(
                f'<text x="{x0 + pad_l - 2}" y="{anchor_y:.1f}" text-anchor="end" '
                f'font-size="7">{val:.3g}</text>'
            )
        out.append(
            f'<text x="{x0 + pad_l}" y="{y0 + pad_t + ph + 9}" font-size="7">{xlo:g}</text>'
            f'<text x="{x0 + pad_l + pw}" y="{y0 + pad_t + ph + 9}" text-anchor="end" '
            f'font-size="7">{xhi:g}</text>'
        )
        if panel.zero_line:
            out.append(
                f'<line class="zero" x1="{x0 + pad_l}" x2="{x0 + pad_l + pw}" '
                f'y1="{_fmt(py(0))}" y2="{_fmt(py(0))}" stroke="#c00" stroke-width="0.6" '
                f'stroke-dasharray="3,2"/>'
            )
        for t in panel.traces:
            pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, t.y))
            out.append(
                f'<polyline fill="none" stroke="{t.color}" stroke-width="1" points="{pts}">'
                f"<title>{escape(t.label)}</title></polyline>"
            )
        out.append("</g>")
    ybase = top + nrows * h
    if xlabel:
        out.append(f'<text x="{width / 2:.1f}" y="{ybase + 14}" text-anchor="middle" font-size="10">{escape(xlabel)}</text>')
    for i, (label, color) in enumerate(legend):
        lx = 10 + i * 90
        out.append(
            f'<g class="legend"><rect x="{lx}" y="{ybase + 22}" width="10" height="6" fill="{color}"/>'
            f'<text x="{lx + 14}" y="{ybase + 28}" font-size="9">{escape(label)}</text></g>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
