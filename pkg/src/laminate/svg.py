"""Standalone SVG plots with their data embedded as comments."""
from __future__ import annotations

import json

import numpy as np

# a short perceptual ramp (dark blue -> yellow), interpolated linearly
_RAMP = np.array([[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]], dtype=float)


def _color(x):
    x = float(np.clip(x, 0.0, 1.0)) * (len(_RAMP) - 1)
    i = min(int(x), len(_RAMP) - 2)
    c = _RAMP[i] + (x - i) * (_RAMP[i + 1] - _RAMP[i])
    return "#%02x%02x%02x" % tuple(int(round(v)) for v in c)


def _fmt(x):
    return f"{x:.5g}"


def _frame(xmin, xmax, ymin, ymax, size=480, pad=20):
    span = max(xmax - xmin, ymax - ymin) or 1.0
    s = (size - 2 * pad) / span

    def tx(p):
        return pad + (p[0] - xmin) * s, size - pad - (p[1] - ymin) * s
    return tx, size


def mesh_overlay(mesh, values, highlight=None, title: str = "") -> str:
    """Triangles colored by ``values``; highlighted triangles get a red outline."""
    X = mesh.corners
    v = np.asarray(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    norm = (v - lo) / (hi - lo) if hi > lo else np.zeros_like(v)
    tx, size = _frame(X[..., 0].min(), X[..., 0].max(), X[..., 1].min(), X[..., 1].max())
    mark = np.zeros(len(v), dtype=bool)
    if highlight is not None:
        mark[np.asarray(highlight, dtype=int)] = True
    data = {"title": title, "min": lo, "max": hi, "n_triangles": len(v),
            "highlighted": int(mark.sum())}
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">',
           f"<!-- data: {json.dumps(data, sort_keys=True)} -->",
           f"<title>{title}</title>"]
    for t in range(len(v)):
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in (tx(p) for p in X[t]))
        stroke = ' stroke="#d62728" stroke-width="0.8"' if mark[t] else ' stroke="none"'
        out.append(f'<polygon points="{pts}" fill="{_color(norm[t])}"{stroke}/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def line_plot(series: dict, title: str = "", identity: bool = False) -> str:
    """``series`` maps a label to (x, y) arrays; optional dashed y = x reference."""
    xs = np.concatenate([np.asarray(x, dtype=float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, dtype=float) for _, y in series.values()])
    xmin, xmax = 0.0, float(xs.max())
    ymin, ymax = min(0.0, float(ys.min())), float(max(ys.max(), xmax if identity else ys.max()))
    tx, size = _frame(xmin, xmax, ymin, ymax)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">',
           f"<title>{title}</title>"]
    for k, (label, (x, y)) in enumerate(series.items()):
        data = {"label": label, "x": [float(a) for a in x], "y": [float(b) for b in y]}
        out.append(f"<!-- data: {json.dumps(data, sort_keys=True)} -->")
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in (tx(p) for p in zip(x, y)))
        col = _color(k / max(1, len(series) - 1))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.5"><title>{label}</title></polyline>')
    if identity:
        a, b = tx((xmin, xmin)), tx((xmax, xmax))
        out.append(f'<line x1="{_fmt(a[0])}" y1="{_fmt(a[1])}" x2="{_fmt(b[0])}" y2="{_fmt(b[1])}" '
                   'stroke="#444" stroke-dasharray="4 3"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
