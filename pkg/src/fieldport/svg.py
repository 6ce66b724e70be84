"""Minimal SVG 1.1 writers for heatmaps and line plots (no timestamps)."""

from __future__ import annotations

import numpy as np

# fixed five-stop colour map, dark blue to yellow
_STOPS = np.array(
    [
        [0.267, 0.005, 0.329],
        [0.231, 0.322, 0.545],
        [0.129, 0.569, 0.549],
        [0.369, 0.788, 0.384],
        [0.993, 0.906, 0.144],
    ]
)


def _colour(v: float) -> str:
    v = min(max(v, 0.0), 1.0) * (len(_STOPS) - 1)
    i = min(int(v), len(_STOPS) - 2)
    c = _STOPS[i] + (v - i) * (_STOPS[i + 1] - _STOPS[i])
    r, g, b = (int(round(255 * t)) for t in c)
    return f"#{r:02x}{g:02x}{b:02x}"


def _header(width, height, title):
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<title>{title}</title>",
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]


def heatmap(values, xs, ys, title="", xlabel="x", ylabel="y") -> str:
    """values[i, j] at (xs[j], ys[i]), linearly scaled between min and max."""
    z = np.asarray(values, dtype=float)
    ny, nx = z.shape
    left, top, cw, ch = 60, 30, 400, 300
    lo, hi = float(z.min()), float(z.max())
    scale = (hi - lo) or 1.0
    w, h = cw / nx, ch / ny
    out = _header(left + cw + 90, top + ch + 50, title)
    for i in range(ny):
        for j in range(nx):
            col = _colour((z[i, j] - lo) / scale)
            y = top + ch - (i + 1) * h
            out.append(f'<rect x="{left + j * w:.3f}" y="{y:.3f}" width="{w:.3f}" height="{h:.3f}" fill="{col}"/>')
    for k in range(21):
        y = top + ch - (k + 1) * ch / 21
        out.append(f'<rect x="{left + cw + 20}" y="{y:.3f}" width="15" height="{ch / 21:.3f}" fill="{_colour(k / 20)}"/>')
    out += [
        f'<text x="{left + cw + 40}" y="{top + 10}" font-size="10">{hi:.3g}</text>',
        f'<text x="{left + cw + 40}" y="{top + ch}" font-size="10">{lo:.3g}</text>',
        f'<text x="{left + cw / 2}" y="{top + ch + 35}" font-size="12" text-anchor="middle">{xlabel}</text>',
        f'<text x="15" y="{top + ch / 2}" font-size="12" transform="rotate(-90 15 {top + ch / 2})" '
        f'text-anchor="middle">{ylabel}</text>',
        f'<text x="{left}" y="{top + ch + 15}" font-size="10">{xs[0]:.3g}</text>',
        f'<text x="{left + cw}" y="{top + ch + 15}" font-size="10" text-anchor="end">{xs[-1]:.3g}</text>',
        f'<text x="{left - 5}" y="{top + ch}" font-size="10" text-anchor="end">{ys[0]:.3g}</text>',
        f'<text x="{left - 5}" y="{top + 10}" font-size="10" text-anchor="end">{ys[-1]:.3g}</text>',
        f'<text x="{left}" y="18" font-size="13">{title}</text>',
        "</svg>",
    ]
    return "\n".join(out) + "\n"


def line_plot(series: dict, title="", xlabel="x", ylabel="y") -> str:
    """series maps a name to (xs, ys)."""
    left, top, cw, ch = 60, 30, 400, 300
    allx = np.concatenate([np.asarray(v[0], float) for v in series.values()])
    ally = np.concatenate([np.asarray(v[1], float) for v in series.values()])
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    sx = cw / ((x1 - x0) or 1.0)
    sy = ch / ((y1 - y0) or 1.0)
    out = _header(left + cw + 120, top + ch + 50, title)
    out.append(f'<rect x="{left}" y="{top}" width="{cw}" height="{ch}" fill="none" stroke="black"/>')
    for k, (name, (xs, ys)) in enumerate(series.items()):
        col = _colour(k / max(len(series) - 1, 1) * 0.8)
        pts = " ".join(f"{left + (x - x0) * sx:.2f},{top + ch - (y - y0) * sy:.2f}" for x, y in zip(xs, ys))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        out.append(f'<text x="{left + cw + 10}" y="{top + 15 + 15 * k}" font-size="11" fill="{col}">{name}</text>')
    out += [
        f'<text x="{left + cw / 2}" y="{top + ch + 35}" font-size="12" text-anchor="middle">{xlabel}</text>',
        f'<text x="15" y="{top + ch / 2}" font-size="12" transform="rotate(-90 15 {top + ch / 2})" '
        f'text-anchor="middle">{ylabel}</text>',
        f'<text x="{left}" y="{top + ch + 15}" font-size="10">{x0:.3g}</text>',
        f'<text x="{left + cw}" y="{top + ch + 15}" font-size="10" text-anchor="end">{x1:.3g}</text>',
        f'<text x="{left - 5}" y="{top + ch}" font-size="10" text-anchor="end">{y0:.3g}</text>',
        f'<text x="{left - 5}" y="{top + 10}" font-size="10" text-anchor="end">{y1:.3g}</text>',
        f'<text x="{left}" y="18" font-size="13">{title}</text>',
        "</svg>",
    ]
    return "\n".join(out) + "\n"
