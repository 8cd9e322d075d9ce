"""Minimal SVG line plots with axes; output is deterministic text."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = ["Series", "Marker", "line_plot"]

PALETTE = ("#1f4e79", "#b03a2e", "#1e8449", "#7d3c98", "#b9770e", "#2e4053")


@dataclass(frozen=True)
class Series:
    x: Sequence[float]
    y: Sequence[float]
    label: str = ""
    dashed: bool = False


@dataclass(frozen=True)
class Marker:
    x: float
    y: float
    label: str = ""


@dataclass(frozen=True)
class _Frame:
    x0: float
    x1: float
    y0: float
    y1: float
    width: int
    height: int
    margin: dict = field(default_factory=lambda: {"l": 70, "r": 20, "t": 36, "b": 50})

    def px(self, x):
        m = self.margin
        return m["l"] + (np.asarray(x) - self.x0) / (self.x1 - self.x0) * (self.width - m["l"] - m["r"])

    def py(self, y):
        m = self.margin
        return self.height - m["b"] - (np.asarray(y) - self.y0) / (self.y1 - self.y0) * (
            self.height - m["t"] - m["b"])


def _limits(values: np.ndarray) -> tuple[float, float]:
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi - lo < 1e-12 * max(1.0, abs(hi)):
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((k * mag for k in (1, 2, 5, 10) if k * mag >= raw), default=10 * mag)
    return np.arange(np.ceil(lo / step) * step, hi + 1e-9 * step, step)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def line_plot(series: Sequence[Series], *, title: str = "", xlabel: str = "", ylabel: str = "",
              markers: Sequence[Marker] = (), width: int = 640, height: int = 420,
              comment: str = "") -> str:
    """Render polylines (and optional point markers) as an SVG document.

    ``comment`` is embedded as an XML comment after the root tag.
    """
    if not series:
        raise ValueError("nothing to plot")
    xs = np.concatenate([np.asarray(s.x, float) for s in series] + [[m.x for m in markers]])
    ys = np.concatenate([np.asarray(s.y, float) for s in series] + [[m.y for m in markers]])
    fr = _Frame(*_limits(xs), *_limits(ys), width, height)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    if comment:
        # "--" is not allowed inside XML comments
        out.insert(1, "<!--\n" + comment.replace("--", "- -") + "\n-->")
    m = fr.margin
    left, right, top, bottom = m["l"], width - m["r"], m["t"], height - m["b"]
    out.append(f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" '
               f'fill="none" stroke="black"/>')
    for t in _ticks(fr.x0, fr.x1):
        x = fr.px(t)
        out.append(f'<line x1="{_fmt(x)}" y1="{bottom}" x2="{_fmt(x)}" y2="{bottom + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{bottom + 18}" text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(fr.y0, fr.y1):
        y = fr.py(t)
        out.append(f'<line x1="{left - 5}" y1="{_fmt(y)}" x2="{left}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{_fmt(y + 4)}" text-anchor="end">{t:.4g}</text>')
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">'
                   f'{_esc(title)}</text>')
    if xlabel:
        out.append(f'<text x="{(left + right) / 2:.1f}" y="{height - 12}" text-anchor="middle">'
                   f'{_esc(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{(top + bottom) / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {(top + bottom) / 2:.1f})">{_esc(ylabel)}</text>')
    for k, s in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(fr.px(s.x), fr.py(s.y)))
        dash = ' stroke-dasharray="6,4"' if s.dashed else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        if s.label:
            ly = top + 16 * (k + 1)
            out.append(f'<line x1="{right - 130}" y1="{ly - 4}" x2="{right - 110}" y2="{ly - 4}" '
                       f'stroke="{color}" stroke-width="1.5"{dash}/>')
            out.append(f'<text x="{right - 104}" y="{ly}">{_esc(s.label)}</text>')
    for mk in markers:
        x, y = fr.px(mk.x), fr.py(mk.y)
        out.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="4" fill="black"/>')
        if mk.label:
            out.append(f'<text x="{_fmt(x + 6)}" y="{_fmt(y - 6)}">{_esc(mk.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
