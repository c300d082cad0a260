"""Minimal polyline SVG plots (fixed 800x600 viewport, round-number ticks)."""

import math

import numpy as np

WIDTH, HEIGHT = 800, 600
MARGIN = dict(left=80, right=20, top=40, bottom=60)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
MAX_POINTS = 2000


def nice_ticks(lo, hi, target=6):
    """Round-number tick positions covering ``[lo, hi]``."""
    if not (np.isfinite(lo) and np.isfinite(hi)):
        return [0.0]
    if hi <= lo:
        lo, hi = lo - 1.0, hi + 1.0
    raw = (hi - lo) / max(target - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw)
    start = math.floor(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 12))
        v += step
    if ticks[-1] < hi:
        ticks.append(round(v, 12))
    return ticks


def _fmt(v):
    return f"{v:.6g}"


def _thin(t, y):
    if len(t) <= MAX_POINTS:
        return t, y
    idx = np.unique(np.linspace(0, len(t) - 1, MAX_POINTS).round().astype(int))
    return t[idx], y[idx]


def line_plot(series, path, title="", xlabel="t [s]", ylabel=""):
    """Write an overlay of ``series = [(label, t, y), ...]`` to ``path``."""
    finite = [np.asarray(y, float)[np.isfinite(y)] for _, _, y in series]
    ys = np.concatenate([f for f in finite if f.size] or [np.zeros(1)])
    ts = np.concatenate([np.asarray(t, float) for _, t, _ in series])
    xt = nice_ticks(float(ts.min()), float(ts.max()))
    yt = nice_ticks(float(ys.min()), float(ys.max()))
    x0, x1, y0, y1 = xt[0], xt[-1], yt[0], yt[-1]
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN["top"] + (y1 - v) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="16">{title}</text>']
    for v in xt:
        X = sx(v)
        out.append(f'<line x1="{X:.2f}" y1="{MARGIN["top"]}" x2="{X:.2f}" '
                   f'y2="{HEIGHT - MARGIN["bottom"]}" stroke="#ddd"/>')
        out.append(f'<text x="{X:.2f}" y="{HEIGHT - MARGIN["bottom"] + 18}" '
                   f'text-anchor="middle" font-size="12">{_fmt(v)}</text>')
    for v in yt:
        Y = sy(v)
        out.append(f'<line x1="{MARGIN["left"]}" y1="{Y:.2f}" x2="{WIDTH - MARGIN["right"]}" '
                   f'y2="{Y:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{Y + 4:.2f}" text-anchor="end" '
                   f'font-size="12">{_fmt(v)}</text>')
    out.append(f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
               f'fill="none" stroke="black"/>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 15}" text-anchor="middle" '
               f'font-size="14">{xlabel}</text>')
    out.append(f'<text x="18" y="{MARGIN["top"] + ph / 2}" text-anchor="middle" font-size="14" '
               f'transform="rotate(-90 18 {MARGIN["top"] + ph / 2})">{ylabel}</text>')
    for i, (label, t, y) in enumerate(series):
        t, y = _thin(np.asarray(t, float), np.asarray(y, float))
        ok = np.isfinite(y)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(t[ok], y[ok]))
        color = COLORS[i % len(COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = MARGIN["top"] + 18 + 18 * i
        lx = WIDTH - MARGIN["right"] - 150
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="2"/>')
        out.append(f'<text x="{lx + 30}" y="{ly + 4}" font-size="12">{label}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
