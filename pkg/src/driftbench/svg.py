"""Static, self-contained SVG line and box plots.

Data values are mirrored into ``data-*`` attributes next to the geometry so
rendered files can be checked against the numbers they were drawn from.
"""

from __future__ import annotations

from html import escape
from typing import Dict, List, Sequence, Tuple

WIDTH, HEIGHT = 640, 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 160, 40, 50
COLORS = ("#2ca02c", "#1f77b4", "#d62728", "#9467bd", "#ff7f0e", "#8c564b")


def y_to_px(value: float, lo: float, hi: float) -> float:
    span = HEIGHT - MARGIN_T - MARGIN_B
    return round(MARGIN_T + (hi - value) / (hi - lo) * span, 4)


def x_to_px(i: float, n: int) -> float:
    span = WIDTH - MARGIN_L - MARGIN_R
    return round(MARGIN_L + (i + 0.5) / n * span, 4)


def _header(title):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]


def _axes(lo, hi, ticks):
    out = []
    x0, x1 = MARGIN_L, WIDTH - MARGIN_R
    for t in ticks:
        y = y_to_px(t, lo, hi)
        out.append(f'<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="#ddd"/>')
        out.append(f'<text x="{x0 - 6}" y="{y + 4}" text-anchor="end">{t:g}</text>')
    out.append(f'<line x1="{x0}" y1="{MARGIN_T}" x2="{x0}" y2="{HEIGHT - MARGIN_B}" stroke="black"/>')
    return out


def line_plot(title: str, x_labels: Sequence[str], series: Dict[str, Sequence[float]],
              lo: float = 0.0, hi: float = 1.0) -> str:
    n = len(x_labels)
    out = _header(title) + _axes(lo, hi, [lo + (hi - lo) * k / 5 for k in range(6)])
    for i, lab in enumerate(x_labels):
        out.append(f'<text x="{x_to_px(i, n)}" y="{HEIGHT - MARGIN_B + 18}" '
                   f'text-anchor="middle">{escape(str(lab))}</text>')
    for j, (name, values) in enumerate(series.items()):
        color = COLORS[j % len(COLORS)]
        pts = " ".join(f"{x_to_px(i, n)},{y_to_px(v, lo, hi)}" for i, v in enumerate(values))
        data = ",".join(repr(float(v)) for v in values)
        out.append(f'<polyline class="series" data-name="{escape(name)}" data-values="{data}" '
                   f'points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for i, v in enumerate(values):
            out.append(f'<circle cx="{x_to_px(i, n)}" cy="{y_to_px(v, lo, hi)}" r="3" fill="{color}"/>')
        ly = MARGIN_T + 10 + 18 * j
        lx = WIDTH - MARGIN_R + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def box_plot(title: str, groups: List[Tuple[str, Sequence[float], Dict[str, float]]],
             lo: float = -1.0, hi: float = 1.0) -> str:
    """Whiskers at min/max, box from q1 to q3, bar at the median.

    ``groups`` holds ``(label, raw values, summary)`` where summary has keys
    min, q1, median, q3, max. A group with no summary is drawn as a label only.
    """
    n = max(len(groups), 1)
    out = _header(title) + _axes(lo, hi, [lo + (hi - lo) * k / 8 for k in range(9)])
    half = min(20.0, (WIDTH - MARGIN_L - MARGIN_R) / n / 3)
    for i, (label, values, s) in enumerate(groups):
        cx = x_to_px(i, n)
        out.append(f'<text x="{cx}" y="{HEIGHT - MARGIN_B + 18}" text-anchor="middle" '
                   f'font-size="10">{escape(label)}</text>')
        if not s:
            continue
        attrs = " ".join(f'data-{k}="{float(s[k])!r}"' for k in ("min", "q1", "median", "q3", "max"))
        out.append(f'<g class="box" data-label="{escape(label)}" {attrs}>')
        y = {k: y_to_px(s[k], lo, hi) for k in ("min", "q1", "median", "q3", "max")}
        out.append(f'<line class="whisker" x1="{cx}" y1="{y["max"]}" x2="{cx}" y2="{y["q3"]}" stroke="black"/>')
        out.append(f'<line class="whisker" x1="{cx}" y1="{y["q1"]}" x2="{cx}" y2="{y["min"]}" stroke="black"/>')
        for k in ("min", "max"):
            out.append(f'<line class="cap-{k}" x1="{cx - half / 2}" y1="{y[k]}" x2="{cx + half / 2}" '
                       f'y2="{y[k]}" stroke="black"/>')
        out.append(f'<rect class="iqr" x="{round(cx - half, 4)}" y="{y["q3"]}" width="{round(2 * half, 4)}" '
                   f'height="{round(y["q1"] - y["q3"], 4)}" fill="#9ecae1" stroke="black"/>')
        out.append(f'<line class="median" x1="{round(cx - half, 4)}" y1="{y["median"]}" '
                   f'x2="{round(cx + half, 4)}" y2="{y["median"]}" stroke="#d62728" stroke-width="2"/>')
        for v in values:
            out.append(f'<circle cx="{cx}" cy="{y_to_px(v, lo, hi)}" r="2" fill="black" opacity="0.5"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
