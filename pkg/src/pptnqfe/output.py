"""CSV and SVG writers plus the seeded random streams used by the CLI."""

from __future__ import annotations

import csv
import html
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["write_csv", "read_csv", "Series", "write_svg", "rng_stream", "STREAM_OFFSETS"]

# Every component draws from its own PCG64 stream, keyed by (seed, offset).
STREAM_OFFSETS = {"pde": 1, "regress": 2, "classify": 3}


def rng_stream(seed: int, component: str) -> np.random.Generator:
    """Independent PCG64 generator for one component of a run."""
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    ss = np.random.SeedSequence(seed, spawn_key=(STREAM_OFFSETS[component],))
    return np.random.Generator(np.random.PCG64(ss))


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return "" if v is None else str(v)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """RFC 4180 CSV (CRLF line ends, UTF-8), floats at 17 significant digits."""
    path = Path(path)
    width = len(header)
    lines = [list(header)]
    for i, row in enumerate(rows):
        row = list(row)
        if len(row) != width:
            raise ValueError(f"{path}: row {i} has {len(row)} fields, header has {width}")
        lines.append([_cell(v) for v in row])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as fh:
            csv.writer(fh, lineterminator="\r\n").writerows(lines)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    try:
        with Path(path).open(encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return rows[0], rows[1:]


@dataclass(frozen=True)
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    style: str = "line"  # or "scatter"


_COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def write_svg(
    path: str | Path,
    series: Sequence[Series],
    title: str = "",
    xlabel: str = "x",
    ylabel: str = "y",
    width: int = 640,
    height: int = 400,
) -> Path:
    """Static line/scatter plot with a framed axis box and min/max tick labels."""
    left, right, top, bottom = 60, 150, 30, 45
    pw, ph = width - left - right, height - top - bottom
    xs = np.concatenate([np.asarray(s.x, float) for s in series]) if series else np.zeros(0)
    ys = np.concatenate([np.asarray(s.y, float) for s in series]) if series else np.zeros(0)
    xs, ys = xs[np.isfinite(xs)], ys[np.isfinite(ys)]
    x0, x1 = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    y0, y1 = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + (1.0 - (v - y0) / (y1 - y0)) * ph

    esc = html.escape
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{left + pw / 2}" y="{top - 10}" text-anchor="middle" font-size="13">{esc(title)}</text>',
        f'<text x="{left + pw / 2}" y="{height - 8}" text-anchor="middle">{esc(xlabel)}</text>',
        f'<text x="14" y="{top + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 14 {top + ph / 2})">{esc(ylabel)}</text>',
        f'<text x="{left}" y="{top + ph + 16}" text-anchor="middle">{x0:.3g}</text>',
        f'<text x="{left + pw}" y="{top + ph + 16}" text-anchor="middle">{x1:.3g}</text>',
        f'<text x="{left - 4}" y="{top + ph}" text-anchor="end">{y0:.3g}</text>',
        f'<text x="{left - 4}" y="{top + 4}" text-anchor="end">{y1:.3g}</text>',
    ]
    for i, s in enumerate(series):
        colour = _COLOURS[i % len(_COLOURS)]
        pts = [(px(a), py(b)) for a, b in zip(s.x, s.y) if np.isfinite(a) and np.isfinite(b)]
        if s.style == "scatter":
            out.extend(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="2.5" fill="{colour}"/>' for a, b in pts)
        elif pts:
            d = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
            out.append(f'<polyline points="{d}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
        ly = top + 12 + 16 * i
        out.append(f'<rect x="{left + pw + 10}" y="{ly - 8}" width="10" height="10" fill="{colour}"/>')
        out.append(f'<text x="{left + pw + 24}" y="{ly + 1}">{esc(s.label)}</text>')
    out.append("</svg>")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(out) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path
