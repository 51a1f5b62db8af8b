"""
GSDM.plots - Self-contained SVG charts

Bar, line and box charts written as plain SVG text so that reports can be
viewed in any browser without a plotting backend.
"""

import os
from typing import Dict, List, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = 60
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


class _Canvas:
    def __init__(self, title: str, y_max: float, y_min: float = 0.0):
        self.items: List[str] = []
        self.y_min = y_min
        self.y_max = y_max if y_max > y_min else y_min + 1.0
        self.items.append(
            f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="16">{escape(title)}</text>'
        )
        self.items.append(
            f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN / 2}" y2="{HEIGHT - MARGIN}" stroke="black"/>'
        )
        self.items.append(f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>')
        for tick in np.linspace(self.y_min, self.y_max, 5):
            y = self.y(tick)
            self.items.append(
                f'<text x="{MARGIN - 6}" y="{y + 4:.1f}" text-anchor="end" font-size="10">{tick:.3g}</text>'
            )

    def y(self, value: float) -> float:
        frac = (value - self.y_min) / (self.y_max - self.y_min)
        return HEIGHT - MARGIN - frac * (HEIGHT - 2 * MARGIN)

    def x_label(self, x: float, text: str) -> None:
        self.items.append(
            f'<text x="{x:.1f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle" font-size="10">{escape(text)}</text>'
        )

    def axis_titles(self, xlabel: str, ylabel: str) -> None:
        self.items.append(
            f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 16}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>'
        )
        self.items.append(
            f'<text x="16" y="{HEIGHT / 2:.1f}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 16 {HEIGHT / 2:.1f})">{escape(ylabel)}</text>'
        )

    def save(self, path: str) -> str:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        body = "\n  ".join(self.items)
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(
                f'<?xml version="1.0" encoding="UTF-8"?>\n'
                f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
                f'viewBox="0 0 {WIDTH} {HEIGHT}">\n  {body}\n</svg>\n'
            )
        return path


def _finite(values) -> np.ndarray:
    arr = np.asarray(list(values), dtype=np.float64)
    return arr[np.isfinite(arr)]


def bar_chart(labels: Sequence[str], values: Sequence[float], path: str, title: str = "", ylabel: str = "") -> str:
    """Vertical bars, one per label."""
    finite = _finite(values)
    canvas = _Canvas(title, float(finite.max()) * 1.1 if finite.size else 1.0)
    slot = (WIDTH - 1.5 * MARGIN) / max(len(labels), 1)
    for i, (label, value) in enumerate(zip(labels, values)):
        x = MARGIN + i * slot + slot * 0.15
        value = float(value) if np.isfinite(value) else 0.0
        top = canvas.y(value)
        canvas.items.append(
            f'<rect x="{x:.1f}" y="{top:.1f}" width="{slot * 0.7:.1f}" height="{canvas.y(0.0) - top:.1f}" '
            f'fill="{PALETTE[i % len(PALETTE)]}"><title>{escape(label)}: {value:.4g}</title></rect>'
        )
        canvas.x_label(x + slot * 0.35, label)
    canvas.axis_titles("", ylabel)
    return canvas.save(path)


def line_chart(series: Dict[str, Tuple[Sequence[float], Sequence[float]]], path: str, title: str = "",
               xlabel: str = "", ylabel: str = "") -> str:
    """One polyline per named series of (xs, ys)."""
    all_x = _finite(x for xs, _ in series.values() for x in xs)
    all_y = _finite(y for _, ys in series.values() for y in ys)
    canvas = _Canvas(title, float(all_y.max()) * 1.1 if all_y.size else 1.0, min(0.0, float(all_y.min()) if all_y.size else 0.0))
    x_lo, x_hi = (float(all_x.min()), float(all_x.max())) if all_x.size else (0.0, 1.0)
    span = x_hi - x_lo or 1.0

    def px(x):
        return MARGIN + (x - x_lo) / span * (WIDTH - 1.5 * MARGIN)

    for x in sorted(set(all_x.tolist())):
        canvas.x_label(px(x), f"{x:g}")
    for i, (name, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        points = " ".join(f"{px(x):.1f},{canvas.y(y):.1f}" for x, y in zip(xs, ys) if np.isfinite(y))
        canvas.items.append(f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2"/>')
        canvas.items.append(
            f'<text x="{WIDTH - MARGIN}" y="{MARGIN + 14 * i}" font-size="11" fill="{color}">{escape(name)}</text>'
        )
    canvas.axis_titles(xlabel, ylabel)
    return canvas.save(path)


def box_chart(groups: Dict[str, Sequence[float]], path: str, title: str = "", ylabel: str = "") -> str:
    """Box-and-whisker summary (min, quartiles, median, max) per group."""
    all_values = _finite(v for values in groups.values() for v in values)
    canvas = _Canvas(title, float(all_values.max()) * 1.1 if all_values.size else 1.0)
    slot = (WIDTH - 1.5 * MARGIN) / max(len(groups), 1)
    for i, (name, values) in enumerate(groups.items()):
        values = _finite(values)
        center = MARGIN + (i + 0.5) * slot
        canvas.x_label(center, name)
        if not values.size:
            continue
        lo, q1, med, q3, hi = np.percentile(values, [0, 25, 50, 75, 100])
        half = slot * 0.25
        color = PALETTE[i % len(PALETTE)]
        canvas.items.append(
            f'<line x1="{center:.1f}" y1="{canvas.y(lo):.1f}" x2="{center:.1f}" y2="{canvas.y(hi):.1f}" stroke="black"/>'
        )
        canvas.items.append(
            f'<rect x="{center - half:.1f}" y="{canvas.y(q3):.1f}" width="{2 * half:.1f}" '
            f'height="{canvas.y(q1) - canvas.y(q3):.1f}" fill="{color}" stroke="black"/>'
        )
        canvas.items.append(
            f'<line x1="{center - half:.1f}" y1="{canvas.y(med):.1f}" x2="{center + half:.1f}" '
            f'y2="{canvas.y(med):.1f}" stroke="black" stroke-width="2"/>'
        )
    canvas.axis_titles("", ylabel)
    return canvas.save(path)
