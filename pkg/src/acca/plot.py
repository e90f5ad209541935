"""Minimal deterministic SVG charts (line series and 2-D scatter)."""
from __future__ import annotations

import os
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT, PAD = 640, 400, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _scale(v: np.ndarray, lo: float, hi: float, out_lo: float, out_hi: float) -> np.ndarray:
    span = hi - lo if hi > lo else 1.0
    return out_lo + (v - lo) / span * (out_hi - out_lo)


def _finite_range(arrays) -> tuple[float, float]:
    vals = np.concatenate([a[np.isfinite(a)] for a in arrays]) if arrays else np.zeros(1)
    if vals.size == 0:
        return 0.0, 1.0
    return float(vals.min()), float(vals.max())


def _frame(title: str, xlabel: str, ylabel: str, xr, yr) -> list[str]:
    x0, x1, y0, y1 = PAD, WIDTH - PAD, HEIGHT - PAD, PAD
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="15" y="{HEIGHT / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 15 {HEIGHT / 2:.1f})">{escape(ylabel)}</text>',
        f'<text x="{x0}" y="{y0 + 15}" font-size="10">{xr[0]:.4g}</text>',
        f'<text x="{x1}" y="{y0 + 15}" text-anchor="end" font-size="10">{xr[1]:.4g}</text>',
        f'<text x="{x0 - 5}" y="{y0}" text-anchor="end" font-size="10">{yr[0]:.4g}</text>',
        f'<text x="{x0 - 5}" y="{y1 + 10}" text-anchor="end" font-size="10">{yr[1]:.4g}</text>',
    ]


def _legend(names) -> list[str]:
    out = []
    for i, name in enumerate(names):
        y = PAD + 15 * i
        c = COLORS[i % len(COLORS)]
        out.append(f'<rect x="{WIDTH - PAD - 110}" y="{y - 8}" width="10" height="10" fill="{c}"/>')
        out.append(f'<text x="{WIDTH - PAD - 95}" y="{y + 1}" font-size="11">{escape(str(name))}</text>')
    return out


def line_chart(x, series: dict[str, np.ndarray], path: str | os.PathLike, title: str = "",
               xlabel: str = "step", ylabel: str = "") -> str:
    """One polyline per series, all sharing the x values; one circle per point."""
    x = np.asarray(x, dtype=np.float64)
    ys = {k: np.asarray(v, dtype=np.float64) for k, v in series.items()}
    xr = _finite_range([x])
    yr = _finite_range(list(ys.values()))
    lines = _frame(title, xlabel, ylabel, xr, yr)
    px = _scale(x, *xr, PAD, WIDTH - PAD)
    for i, (name, y) in enumerate(ys.items()):
        c = COLORS[i % len(COLORS)]
        ok = np.isfinite(y)
        py = _scale(y, *yr, HEIGHT - PAD, PAD)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px[ok], py[ok]))
        lines.append(f'<polyline class="series" data-name="{escape(name)}" fill="none" stroke="{c}" points="{pts}"/>')
        for a, b in zip(px[ok], py[ok]):
            lines.append(f'<circle class="point" data-series="{escape(name)}" cx="{a:.2f}" cy="{b:.2f}" r="2" fill="{c}"/>')
    lines += _legend(ys)
    lines.append("</svg>")
    return _write(path, lines)


def scatter(points, path: str | os.PathLike, labels=None, title: str = "", xlabel: str = "z0", ylabel: str = "z1") -> str:
    """Scatter of the first two columns, coloured by integer label."""
    P = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if P.shape[1] < 2:
        P = np.hstack([P, np.zeros((P.shape[0], 1))])
    lab = np.zeros(P.shape[0], dtype=np.int64) if labels is None else np.asarray(labels).astype(np.int64)
    xr = _finite_range([P[:, 0]])
    yr = _finite_range([P[:, 1]])
    lines = _frame(title, xlabel, ylabel, xr, yr)
    px = _scale(P[:, 0], *xr, PAD, WIDTH - PAD)
    py = _scale(P[:, 1], *yr, HEIGHT - PAD, PAD)
    for a, b, l in zip(px, py, lab):
        lines.append(f'<circle class="point" cx="{a:.2f}" cy="{b:.2f}" r="1.5" fill="{COLORS[l % len(COLORS)]}"/>')
    if labels is not None:
        lines += _legend([str(v) for v in np.unique(lab)])
    lines.append("</svg>")
    return _write(path, lines)


def bar_chart(values: dict[str, float], path: str | os.PathLike, title: str = "") -> str:
    names = list(values)
    v = np.array([values[k] for k in names], dtype=np.float64)
    lo = min(0.0, float(v.min())) if v.size else 0.0
    hi = max(0.0, float(v.max())) if v.size else 1.0
    lines = _frame(title, "", "value", (0, len(names)), (lo, hi))
    w = (WIDTH - 2 * PAD) / max(len(names), 1)
    base = _scale(np.array(0.0), lo, hi, HEIGHT - PAD, PAD)
    for i, (name, val) in enumerate(zip(names, v)):
        top = _scale(np.array(val), lo, hi, HEIGHT - PAD, PAD)
        y, h = min(top, base), abs(base - top)
        x = PAD + i * w
        lines.append(f'<rect class="bar" x="{x + 2:.2f}" y="{y:.2f}" width="{w - 4:.2f}" height="{h:.2f}" '
                     f'fill="{COLORS[i % len(COLORS)]}"/>')
        lines.append(f'<text x="{x + w / 2:.2f}" y="{HEIGHT - PAD + 28}" text-anchor="middle" font-size="9">{escape(name)}</text>')
    lines.append("</svg>")
    return _write(path, lines)


def _write(path, lines) -> str:
    path = os.fspath(path)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
