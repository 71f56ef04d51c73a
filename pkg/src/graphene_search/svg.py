"""Minimal static SVG line plots (no scripts, no plotting dependency)."""
from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 720, 480
MARGIN = dict(left=70, right=20, top=40, bottom=55)


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    color: str = "#999999"
    width: float = 0.6
    label: str | None = None


def _nice_ticks(lo, hi, count=6):
    span = hi - lo
    raw = span / max(count - 1, 1)
    mag = 10 ** np.floor(np.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + 1e-9 * span, step)


def line_plot(series, xlim, ylim, xlabel="", ylabel="", title="", markers=()) -> str:
    """Render polylines into an SVG document string.

    ``markers`` are ``(x, y, label)`` points drawn as open circles.
    """
    (x0, x1), (y0, y1) = xlim, ylim
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x):
        return MARGIN["left"] + (np.asarray(x) - x0) / (x1 - x0) * pw

    def sy(y):
        return MARGIN["top"] + (y1 - np.asarray(y)) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<clipPath id="plot"><rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}"/></clipPath>',
    ]
    for t in _nice_ticks(x0, x1):
        out.append(f'<line x1="{sx(t):.2f}" y1="{MARGIN["top"] + ph}" x2="{sx(t):.2f}" '
                   f'y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{sx(t):.2f}" y="{MARGIN["top"] + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _nice_ticks(y0, y1):
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{sy(t):.2f}" x2="{MARGIN["left"]}" '
                   f'y2="{sy(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{sy(t) + 4:.2f}" text-anchor="end">{t:g}</text>')

    out.append('<g clip-path="url(#plot)" fill="none">')
    for s in series:
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(sx(s.x), sy(s.y)))
        out.append(f'<polyline points="{pts}" stroke="{s.color}" stroke-width="{s.width}"/>')
    for mx, my, _ in markers:
        out.append(f'<circle cx="{sx(mx):.2f}" cy="{sy(my):.2f}" r="6" stroke="black" stroke-width="1.2"/>')
    out.append("</g>")

    out.append(f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
               'fill="none" stroke="black"/>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text transform="translate(18,{MARGIN["top"] + ph / 2:.1f}) rotate(-90)" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    out.append(f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>')

    legend = [s for s in series if s.label]
    for i, s in enumerate(legend):
        y = MARGIN["top"] + 14 + 16 * i
        x = MARGIN["left"] + pw - 150
        out.append(f'<line x1="{x}" y1="{y}" x2="{x + 20}" y2="{y}" stroke="{s.color}" stroke-width="2"/>')
        out.append(f'<text x="{x + 26}" y="{y + 4}">{escape(s.label)}</text>')
    out.append("</svg>\n")
    return "\n".join(out)


def spectrum_svg(sweep, ylim=None) -> str:
    """Eigenvalues against gamma, tracked perturber branches drawn on top."""
    g = sweep.gammas
    E = sweep.eigenvalues
    if ylim is None:
        top = float(np.abs(E).max())
        ylim = (-top, top)
    series = [Series(g, E[:, i]) for i in range(E.shape[1])]
    series.append(Series(g, sweep.branch_energies[:, 0], "#d62728", 1.8, "upper perturber"))
    series.append(Series(g, sweep.branch_energies[:, 1], "#1f77b4", 1.8, "lower perturber"))
    i = sweep.crossing_index
    crossing = (float(g[i]), float(sweep.branch_energies[i].mean()), "crossing")
    return line_plot(series, (float(g[0]), float(g[-1])), ylim, "gamma", "E",
                     f"Spectrum of H_gamma, {sweep.spec} cells", markers=[crossing])


def search_svg(run) -> str:
    """Neighbor-site probabilities against time for a search run."""
    t = run.times
    series = [Series(t, run.P_total, "#d62728", 1.8, "P_total")]
    colors = ("#1f77b4", "#2ca02c", "#9467bd")
    for j in range(run.P_sites.shape[1]):
        series.append(Series(t, run.P_sites[:, j], colors[j], 1.0, f"P_site{j + 1}"))
    top = max(float(run.P_total.max()) * 1.1, 1e-3)
    return line_plot(series, (float(t[0]), float(t[-1])), (0.0, top), "t", "probability",
                     f"Search on {run.spec} cells, marked {run.marked}",
                     markers=[(run.T_peak, run.P_peak, "peak")])
