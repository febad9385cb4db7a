"""Self-contained SVG phase-plane plots (x1 against x2)."""

from __future__ import annotations

import numpy as np
from scipy import ndimage, optimize

from .expr import lambdify
from .synth import SynthesisResult

WIDTH = 640
HEIGHT = 520
MARGIN = 60
MAX_POINTS = 2000
MINIMIZER_TOL = 1e-10
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def _nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    span = hi - lo
    raw = span / max(target, 1)
    mag = 10.0 ** np.floor(np.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = np.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * span:
        ticks.append(0.0 if abs(t) < 1e-12 * span else float(t))
        t += step
    return ticks


def _window(trajectories, pad: float = 0.08):
    pts = np.concatenate([t.states[:, :2] for t in trajectories] + [np.zeros((1, 2))])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    return lo - pad * span, hi + pad * span


def minimizer_points(result: SynthesisResult, lo, hi, resolution: int | None = None) -> np.ndarray:
    """States in the box ``[lo, hi]`` (first two axes) where ``L(x, u(x)) <= 1e-10``.

    Local minima of a grid sample are polished with BFGS; for third-order
    systems the extra axis is searched over ``[-1, 1]`` and the result is
    projected to ``(x1, x2)``.  Returns an array of shape ``(k, 2)``.
    """
    n = result.order
    resolution = resolution or (161 if n == 2 else 41)
    L = lambdify(result.L)
    pad = [0.0] * (3 - n)
    axes = [np.linspace(lo[i], hi[i], resolution) for i in range(2)]
    if n == 3:
        axes.append(np.linspace(-1.0, 1.0, resolution))
    mesh = np.meshgrid(*axes, indexing="ij")
    with np.errstate(all="ignore"):
        vals = np.asarray(L(*mesh, *pad) + 0.0 * mesh[0])
    vals = np.where(np.isfinite(vals), vals, np.inf)
    local = (vals == ndimage.minimum_filter(vals, size=3, mode="nearest"))
    idx = np.argwhere(local & (vals < np.inf))
    if idx.size == 0:
        return np.zeros((0, 2))
    # polish only the lowest candidates to bound the cost
    order = np.argsort(vals[tuple(idx.T)], kind="stable")[:400]

    def fun(z):
        return float(L(*z, *pad))

    found = []
    for k in order:
        x0 = np.array([axes[i][idx[k][i]] for i in range(n)])
        if vals[tuple(idx[k])] <= MINIMIZER_TOL:
            found.append(np.round(x0[:2], 6))
            continue
        res = optimize.minimize(fun, x0, method="BFGS", options={"gtol": 1e-12})
        if res.fun <= MINIMIZER_TOL and np.all(res.x[:2] >= lo) and np.all(res.x[:2] <= hi):
            found.append(np.round(res.x[:2], 6))
    if not found:
        return np.zeros((0, 2))
    return np.unique(np.array(found) + 0.0, axis=0)


def phase_plane_svg(trajectories, result: SynthesisResult | None = None, title: str = "",
                    show_minimizers: bool = True) -> str:
    """Render trajectories as an SVG string (x1 horizontal, x2 vertical).

    Start points are open circles, end points filled dots and minimizers of
    the running cost (when ``result`` is given) grey crosses.  The output is
    deterministic for identical inputs.
    """
    lo, hi = _window(trajectories)
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def sx(x):
        return MARGIN + (x - lo[0]) / (hi[0] - lo[0]) * pw

    def sy(y):
        return HEIGHT - MARGIN - (y - lo[1]) / (hi[1] - lo[1]) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _nice_ticks(lo[0], hi[0]):
        x = sx(t)
        out.append(f'<line x1="{x:.2f}" y1="{MARGIN}" x2="{x:.2f}" y2="{HEIGHT - MARGIN}" stroke="#e0e0e0"/>')
        out.append(f'<text x="{x:.2f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle">{t:g}</text>')
    for t in _nice_ticks(lo[1], hi[1]):
        y = sy(t)
        out.append(f'<line x1="{MARGIN}" y1="{y:.2f}" x2="{WIDTH - MARGIN}" y2="{y:.2f}" stroke="#e0e0e0"/>')
        out.append(f'<text x="{MARGIN - 6}" y="{y + 4:.2f}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{WIDTH / 2:.2f}" y="{HEIGHT - 18}" text-anchor="middle">x1</text>')
    out.append(f'<text x="18" y="{HEIGHT / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {HEIGHT / 2:.2f})">x2</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="{MARGIN / 2:.2f}" text-anchor="middle" '
                   f'font-size="14">{_escape(title)}</text>')
    if result is not None and show_minimizers:
        for x, y in minimizer_points(result, lo, hi):
            cx, cy = sx(x), sy(y)
            out.append(f'<path d="M{cx - 4:.2f},{cy - 4:.2f}L{cx + 4:.2f},{cy + 4:.2f}'
                       f'M{cx - 4:.2f},{cy + 4:.2f}L{cx + 4:.2f},{cy - 4:.2f}" stroke="#808080" stroke-width="1.5"/>')
    for j, traj in enumerate(trajectories):
        color = PALETTE[j % len(PALETTE)]
        pts = traj.states[:, :2]
        step = max(1, int(np.ceil(len(pts) / MAX_POINTS)))
        keep = list(range(0, len(pts), step))
        if keep[-1] != len(pts) - 1:
            keep.append(len(pts) - 1)
        path = " ".join(f"{sx(pts[k, 0]):.2f},{sy(pts[k, 1]):.2f}" for k in keep)
        out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<circle cx="{sx(pts[0, 0]):.2f}" cy="{sy(pts[0, 1]):.2f}" r="4" fill="white" stroke="{color}"/>')
        out.append(f'<circle cx="{sx(pts[-1, 0]):.2f}" cy="{sy(pts[-1, 1]):.2f}" r="3" fill="{color}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_svg(path, trajectories, result: SynthesisResult | None = None, title: str = "") -> None:
    with open(path, "w") as fh:
        fh.write(phase_plane_svg(trajectories, result, title))
