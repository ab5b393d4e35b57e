"""Trace tables and a two-panel SVG figure, written without plotting libraries."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def traces_csv(path: str | Path, time: np.ndarray, panels: dict[str, np.ndarray],
               bus_ids: Sequence[int]) -> None:
    """One row per time step; columns <panel>_bus<id> for each panel."""
    cols, names = [np.asarray(time)], ["time"]
    for label, F in panels.items():
        for k, b in enumerate(bus_ids):
            cols.append(np.asarray(F)[:, k])
            names.append(f"{label}_bus{b}")
    np.savetxt(path, np.column_stack(cols), fmt="%.6f", delimiter=",",
               header=",".join(names), comments="")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    span = hi - lo
    raw = span / max(n, 1)
    mag = 10 ** np.floor(np.log10(raw)) if raw > 0 else 1.0
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=mag)
    start = np.ceil(lo / step) * step
    return [float(v) for v in np.arange(start, hi + 1e-9 * step, step)]


def _panel(x0, y0, w, h, time, F, bus_ids, title, ylim, limit) -> list[str]:
    t0, t1 = float(time[0]), float(time[-1])
    lo, hi = ylim

    def px(t):
        return x0 + (t - t0) / (t1 - t0) * w

    def py(f):
        return y0 + h - (f - lo) / (hi - lo) * h

    out = [f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#333"/>',
           f'<text x="{x0 + w / 2:.1f}" y="{y0 - 10}" text-anchor="middle" font-size="14">{escape(title)}</text>']
    for v in _ticks(lo, hi):
        out.append(f'<line x1="{x0 - 4}" y1="{py(v):.2f}" x2="{x0}" y2="{py(v):.2f}" stroke="#333"/>')
        out.append(f'<text x="{x0 - 6}" y="{py(v) + 4:.2f}" text-anchor="end" font-size="10">{v:.2f}</text>')
    for v in _ticks(t0, t1):
        out.append(f'<line x1="{px(v):.2f}" y1="{y0 + h}" x2="{px(v):.2f}" y2="{y0 + h + 4}" stroke="#333"/>')
        out.append(f'<text x="{px(v):.2f}" y="{y0 + h + 16}" text-anchor="middle" font-size="10">{v:g}</text>')
    out.append(f'<text x="{x0 + w / 2:.1f}" y="{y0 + h + 32}" text-anchor="middle" font-size="11">time (s)</text>')
    if limit is not None and lo <= limit <= hi:
        out.append(f'<line x1="{x0}" y1="{py(limit):.2f}" x2="{x0 + w}" y2="{py(limit):.2f}" '
                   f'stroke="#000" stroke-dasharray="6,4"/>')
    stride = max(1, len(time) // 800)
    for k, b in enumerate(bus_ids):
        pts = " ".join(f"{px(t):.2f},{py(f):.3f}" for t, f in zip(time[::stride], F[::stride, k]))
        out.append(f'<polyline fill="none" stroke="{PALETTE[k % len(PALETTE)]}" stroke-width="1.2" '
                   f'points="{pts}"><title>bus {b}</title></polyline>')
    return out


def traces_svg(path: str | Path, time: np.ndarray, left: np.ndarray, right: np.ndarray,
               bus_ids: Sequence[int], titles=("Unregulated", "Regulated"),
               limit: float | None = 59.6) -> None:
    """Side-by-side bus-frequency traces sharing one frequency axis."""
    time = np.asarray(time)
    left, right = np.asarray(left), np.asarray(right)
    lo = float(min(left.min(), right.min(), limit if limit is not None else np.inf))
    hi = float(max(left.max(), right.max()))
    pad = 0.05 * max(hi - lo, 1e-3)
    ylim = (lo - pad, hi + pad)
    W, H, w, h = 980, 420, 400, 300
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
             f'viewBox="0 0 {W} {H}" font-family="sans-serif">',
             f'<rect width="{W}" height="{H}" fill="white"/>',
             f'<text x="20" y="{50 + h / 2}" font-size="11" transform="rotate(-90 20 {50 + h / 2})" '
             f'text-anchor="middle">frequency (Hz)</text>']
    parts += _panel(70, 50, w, h, time, left, bus_ids, titles[0], ylim, limit)
    parts += _panel(540, 50, w, h, time, right, bus_ids, titles[1], ylim, limit)
    for k, b in enumerate(bus_ids):
        x = 70 + k * 85
        parts.append(f'<line x1="{x}" y1="{H - 12}" x2="{x + 16}" y2="{H - 12}" '
                     f'stroke="{PALETTE[k % len(PALETTE)]}" stroke-width="2"/>')
        parts.append(f'<text x="{x + 20}" y="{H - 8}" font-size="10">bus {b}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
